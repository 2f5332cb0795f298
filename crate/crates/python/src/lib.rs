//! Python bindings for orlicz-ps.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use orlicz_ps::affine_ball::{self, make_quadrature, SphericalQuadrature};
use orlicz_ps::harness::{ExperimentConfig, Harness, Suite};
use orlicz_ps::luxemburg::{self, WeightedSampleSet};
use orlicz_ps::orlicz::{self, OrliczSpec};
use orlicz_ps::rearrangement::{self, DirectionSchedule};
use orlicz_ps::scalar_field;
use orlicz_ps::star_projection;

fn err(e: orlicz_ps::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn quadrature(dim: usize, nodes: Option<usize>) -> PyResult<SphericalQuadrature> {
    match nodes {
        Some(n) => make_quadrature(dim, n),
        None => SphericalQuadrature::default_for(dim),
    }
    .map_err(err)
}

/// A convexity function φ.
#[pyclass(name = "OrliczFunction", module = "orlicz_ps", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyOrlicz(orlicz::OrliczFunction);

#[pymethods]
impl PyOrlicz {
    #[staticmethod]
    fn power(p: f64) -> PyResult<Self> {
        orlicz::OrliczFunction::power(p).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (p, lam))]
    fn asymmetric_power(p: f64, lam: f64) -> PyResult<Self> {
        orlicz::OrliczFunction::asymmetric_power(p, lam).map(Self).map_err(err)
    }

    #[staticmethod]
    fn exponential() -> Self {
        Self(orlicz::OrliczFunction::exponential())
    }

    #[staticmethod]
    fn custom(breakpoints: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        orlicz::OrliczFunction::custom(breakpoints, values).map(Self).map_err(err)
    }

    /// Builds φ from its json description, e.g. `{"family":"power","p":2.0}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: OrliczSpec = serde_json::from_str(text).map_err(json_err)?;
        spec.build().map(Self).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&OrliczSpec::from(&self.0)).map_err(json_err)
    }

    fn __call__(&self, t: f64) -> f64 {
        self.0.eval(t)
    }

    fn big_phi(&self, t: f64) -> f64 {
        self.0.big_phi(t)
    }

    fn even_majorant(&self) -> Self {
        Self(self.0.even_majorant())
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label()
    }

    #[getter]
    fn is_even(&self) -> bool {
        self.0.is_even()
    }

    fn c_phi(&self) -> f64 {
        luxemburg::c_phi(&self.0)
    }

    /// Sampled class conditions as a json report.
    #[pyo3(signature = (t_max = 10.0, grid_count = 2000))]
    fn validate(&self, t_max: f64, grid_count: usize) -> PyResult<String> {
        let r = orlicz::validate(&self.0, t_max, grid_count).map_err(err)?;
        serde_json::to_string(&r).map_err(json_err)
    }

    fn __repr__(&self) -> String {
        format!("OrliczFunction({})", self.0.label())
    }
}

/// A nonnegative field on a regular grid.
#[pyclass(name = "ScalarField", module = "orlicz_ps", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyField(scalar_field::ScalarField);

#[pymethods]
impl PyField {
    /// Row-major values (last axis fastest) on the box `[lo, hi]`.
    #[new]
    fn new(lo: Vec<f64>, hi: Vec<f64>, resolution: Vec<usize>, values: Vec<f64>) -> PyResult<Self> {
        let grid = scalar_field::Grid::new(lo, hi, resolution).map_err(err)?;
        scalar_field::ScalarField::new(grid, values).map(Self).map_err(err)
    }

    /// Samples a Python callable at the cell centers of a cube grid.
    #[staticmethod]
    fn sample(dim: usize, half_width: f64, resolution: usize, f: &Bound<'_, PyAny>) -> PyResult<Self> {
        let grid = scalar_field::Grid::cube(dim, half_width, resolution).map_err(err)?;
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let c = grid.cell_center(i);
            let v: f64 = f.call1((c[..dim].to_vec(),))?.extract()?;
            values.push(if grid.in_band(&grid.unravel(i)) { 0.0 } else { v.max(0.0) });
        }
        scalar_field::ScalarField::new(grid, values).map(Self).map_err(err)
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        scalar_field::read_field(&path).map(Self).map_err(err)
    }

    #[pyo3(signature = (path, label = None))]
    fn write(&self, path: PathBuf, label: Option<String>) -> PyResult<()> {
        scalar_field::write_field(&path, &self.0, label).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.grid().dim()
    }

    #[getter]
    fn resolution(&self) -> Vec<usize> {
        self.0.grid().resolution().to_vec()
    }

    #[getter]
    fn lo(&self) -> Vec<f64> {
        self.0.grid().lo().to_vec()
    }

    #[getter]
    fn hi(&self) -> Vec<f64> {
        self.0.grid().hi().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn integral(&self) -> f64 {
        self.0.integral()
    }

    fn max(&self) -> f64 {
        self.0.max()
    }

    fn support_count(&self) -> usize {
        self.0.support_count()
    }

    fn superlevel_volume(&self, h: f64) -> f64 {
        self.0.superlevel_volume(h)
    }

    fn l1_distance(&self, other: &PyField) -> PyResult<f64> {
        self.0.l1_distance(&other.0).map_err(err)
    }

    fn value_at(&self, x: Vec<f64>) -> f64 {
        self.0.value_at(&x)
    }

    fn steiner(&self, direction: Vec<f64>) -> PyResult<Self> {
        rearrangement::steiner(&self.0, &direction).map(Self).map_err(err)
    }

    fn sdr(&self) -> Self {
        Self(rearrangement::sdr(&self.0))
    }

    /// `k` Steiner steps; returns the final field and the per-step trace as json.
    #[pyo3(signature = (k, schedule = "axes-cyclic", seed = 0))]
    fn approximate_sdr(&self, k: usize, schedule: &str, seed: u64) -> PyResult<(Self, String)> {
        let dim = self.0.grid().dim();
        let schedule = match schedule {
            "axes-cyclic" => DirectionSchedule::axes_cyclic(dim),
            "random-uniform" => DirectionSchedule::random_uniform(dim, k, seed),
            other => return Err(PyValueError::new_err(format!("unknown schedule {other}"))),
        }
        .map_err(err)?;
        let (g, trace) = rearrangement::approximate_sdr(&self.0, &schedule, k).map_err(err)?;
        Ok((Self(g), serde_json::to_string(&trace).map_err(json_err)?))
    }

    /// Luxemburg norm of the directional derivative along `v`.
    fn directional_norm(&self, v: Vec<f64>, phi: &PyOrlicz) -> PyResult<f64> {
        luxemburg::directional_norm(&self.0, &v, &phi.0).map_err(err)
    }

    /// Radial function of the affine ball at the quadrature nodes.
    #[pyo3(signature = (phi, nodes = None))]
    fn affine_ball(&self, phi: &PyOrlicz, nodes: Option<usize>) -> PyResult<Vec<f64>> {
        let q = quadrature(self.0.grid().dim(), nodes)?;
        Ok(affine_ball::affine_ball(&self.0, &phi.0, &q).map_err(err)?.radial().to_vec())
    }

    #[pyo3(signature = (phi, nodes = None))]
    fn energy(&self, phi: &PyOrlicz, nodes: Option<usize>) -> PyResult<f64> {
        let q = quadrature(self.0.grid().dim(), nodes)?;
        affine_ball::energy(&self.0, &phi.0, &q).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("ScalarField(resolution={:?}, integral={:.6})", self.0.grid().resolution(), self.0.integral())
    }
}

/// A star body sampled on a spherical quadrature.
#[pyclass(name = "StarBody", module = "orlicz_ps", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyStar(star_projection::StarBody);

#[pymethods]
impl PyStar {
    #[staticmethod]
    #[pyo3(signature = (dim, radius = 1.0, nodes = 512))]
    fn ball(dim: usize, radius: f64, nodes: usize) -> PyResult<Self> {
        star_projection::StarBody::ball(dim, nodes, radius).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (a, b, nodes = 512))]
    fn ellipse(a: f64, b: f64, nodes: usize) -> PyResult<Self> {
        star_projection::StarBody::ellipse(a, b, nodes).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (seed, amplitude = 0.3, nodes = 512))]
    fn random_star(seed: u64, amplitude: f64, nodes: usize) -> PyResult<Self> {
        star_projection::StarBody::random_star(nodes, amplitude, seed).map(Self).map_err(err)
    }

    /// Planar body from radial samples at uniformly spaced angles.
    #[staticmethod]
    fn from_radial(radial: Vec<f64>) -> PyResult<Self> {
        let q = make_quadrature(2, radial.len()).map_err(err)?;
        star_projection::StarBody::new(q, radial).map(Self).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn radial(&self) -> Vec<f64> {
        self.0.radial().to_vec()
    }

    fn volume(&self) -> f64 {
        self.0.volume()
    }

    fn gauge(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.gauge(&x).map_err(err)
    }

    fn polar(&self) -> PyResult<Self> {
        star_projection::polar(&self.0).map(Self).map_err(err)
    }

    /// Support function of the Orlicz projection body at the quadrature nodes.
    fn projection_support(&self, phi: &PyOrlicz) -> PyResult<Vec<f64>> {
        Ok(star_projection::orlicz_projection_body(&self.0, &phi.0).map_err(err)?.support().to_vec())
    }

    fn petty_ratio(&self, phi: &PyOrlicz) -> PyResult<f64> {
        star_projection::petty_ratio(&self.0, &phi.0).map_err(err)
    }

    /// Cone function 1 − g_K on a cube grid.
    fn cone_function(&self, half_width: f64, resolution: usize) -> PyResult<PyField> {
        let grid = scalar_field::Grid::cube(self.0.dim(), half_width, resolution).map_err(err)?;
        star_projection::cone_function(&self.0, grid).map(PyField).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("StarBody(dim={}, nodes={}, volume={:.6})", self.0.dim(), self.0.radial().len(), self.0.volume())
    }
}

/// Luxemburg norm of weighted samples; `total_mass` defaults to the weight sum.
#[pyfunction]
#[pyo3(signature = (samples, weights, phi, total_mass = None))]
fn luxemburg_norm(samples: Vec<f64>, weights: Vec<f64>, phi: &PyOrlicz, total_mass: Option<f64>) -> PyResult<f64> {
    let mass = total_mass.unwrap_or_else(|| weights.iter().sum());
    let set = WeightedSampleSet::new(samples, weights, mass).map_err(err)?;
    luxemburg::luxemburg_norm(&set, &phi.0).map_err(err)
}

/// Runs one suite and returns its report as json.
#[pyfunction]
#[pyo3(signature = (suite, config_json = None))]
fn run_suite(suite: &str, config_json: Option<&str>) -> PyResult<String> {
    let cfg = match config_json {
        Some(text) => ExperimentConfig::from_json(text).map_err(err)?,
        None => ExperimentConfig::default(),
    };
    let suite: Suite = suite.parse().map_err(err)?;
    let report = Harness::new(cfg).map_err(err)?.run(suite).map_err(err)?;
    report.to_json().map_err(err)
}

#[pyfunction]
fn default_config() -> PyResult<String> {
    ExperimentConfig::default().to_json().map_err(err)
}

#[pymodule]
#[pyo3(name = "orlicz_ps")]
fn orlicz_ps_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOrlicz>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyStar>()?;
    m.add_function(wrap_pyfunction!(luxemburg_norm, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
