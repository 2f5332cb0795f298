//! Nonnegative, compactly supported functions sampled at the cell centers of
//! a regular grid in two or three dimensions.
//!
//! Fields vanish on a band of [`BAND`] cells along the box boundary, so the
//! extension by zero outside the box is automatic: every query outside the
//! box returns 0. Volumes (support, superlevel sets) are cell-counting
//! measures.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width, in cells, of the zero band along the box boundary.
pub const BAND: usize = 2;
/// Smallest admissible resolution per axis.
pub const MIN_RESOLUTION: usize = 16;

pub(crate) fn check_unit(v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitDirection { norm });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    resolution: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        let dim = lo.len();
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}")));
        }
        if hi.len() != dim || resolution.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: hi.len().min(resolution.len()) });
        }
        for k in 0..dim {
            if !(lo[k].is_finite() && hi[k].is_finite() && lo[k] < hi[k]) {
                return Err(Error::InvalidParameter(format!("axis {k}: need lo < hi")));
            }
            if resolution[k] < MIN_RESOLUTION {
                return Err(Error::InvalidParameter(format!(
                    "axis {k}: resolution {} below {MIN_RESOLUTION}",
                    resolution[k]
                )));
            }
        }
        Ok(Self { dim, lo, hi, resolution })
    }

    /// The box [−h, h]^dim with `res` cells per axis.
    pub fn cube(dim: usize, half_width: f64, res: usize) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim], vec![res; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.resolution[axis] as f64
    }

    pub fn spacings(&self) -> [f64; 3] {
        let mut h = [0.0; 3];
        for (k, hk) in h.iter_mut().enumerate().take(self.dim) {
            *hk = self.spacing(k);
        }
        h
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|k| self.spacing(k)).product()
    }

    pub fn cell_diagonal(&self) -> f64 {
        (0..self.dim).map(|k| self.spacing(k).powi(2)).sum::<f64>().sqrt()
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major strides: the last axis varies fastest.
    pub fn strides(&self) -> [usize; 3] {
        let mut s = [0usize; 3];
        let mut acc = 1;
        for k in (0..self.dim).rev() {
            s[k] = acc;
            acc *= self.resolution[k];
        }
        s
    }

    pub fn unravel(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for k in (0..self.dim).rev() {
            out[k] = idx % self.resolution[k];
            idx /= self.resolution[k];
        }
        out
    }

    pub fn ravel(&self, ix: &[usize]) -> usize {
        let s = self.strides();
        (0..self.dim).map(|k| ix[k] * s[k]).sum()
    }

    pub fn cell_center(&self, idx: usize) -> [f64; 3] {
        let ix = self.unravel(idx);
        let mut x = [0.0; 3];
        for k in 0..self.dim {
            x[k] = self.lo[k] + (ix[k] as f64 + 0.5) * self.spacing(k);
        }
        x
    }

    pub fn box_center(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for k in 0..self.dim {
            c[k] = 0.5 * (self.lo[k] + self.hi[k]);
        }
        c
    }

    /// Whether the cell lies in the boundary band.
    pub fn in_band(&self, ix: &[usize]) -> bool {
        (0..self.dim).any(|k| ix[k] < BAND || ix[k] + BAND >= self.resolution[k])
    }

    /// Whether `x` lies at least `margin` cells away from the box boundary,
    /// measured per axis.
    pub fn contains_with_margin(&self, x: &[f64], margin: f64) -> bool {
        (0..self.dim).all(|k| {
            let m = margin * self.spacing(k);
            x[k] >= self.lo[k] + m && x[k] <= self.hi[k] - m
        })
    }
}

/// A nonnegative field on a grid, zero on the boundary band.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidField(format!("value {} at cell {i} is negative or not finite", values[i])));
        }
        for (i, &v) in values.iter().enumerate() {
            if v != 0.0 && grid.in_band(&grid.unravel(i)) {
                return Err(Error::InvalidField(format!(
                    "nonzero value {v} in the {BAND}-cell boundary band at cell {i}"
                )));
            }
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    /// Samples `f` at the cell centers. Negative samples are clipped to zero;
    /// positive samples in the boundary band are an error.
    pub fn sample<F: Fn(&[f64]) -> f64>(grid: Grid, f: F) -> Result<Self> {
        let dim = grid.dim();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let x = grid.cell_center(i);
            let v = f(&x[..dim]);
            if !v.is_finite() {
                return Err(Error::InvalidField(format!("non-finite sample at cell {i}")));
            }
            values.push(v.max(0.0));
        }
        for (i, &v) in values.iter().enumerate() {
            if v > 0.0 && grid.in_band(&grid.unravel(i)) {
                return Err(Error::SupportOutsideBox {
                    context: format!("sampled support reaches the boundary band at cell {i}"),
                });
            }
        }
        Ok(Self { grid, values })
    }

    /// Builds a field from values produced internally, zeroing the band.
    pub(crate) fn from_values_clamped(grid: Grid, mut values: Vec<f64>) -> Self {
        for (i, v) in values.iter_mut().enumerate() {
            if !(*v > 0.0) || grid.in_band(&grid.unravel(i)) {
                *v = 0.0;
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l1_distance(&self, other: &ScalarField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::InvalidParameter("fields live on different grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * self.grid.cell_volume())
    }

    pub fn support_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    /// |G|: number of positive cells times the cell volume.
    pub fn support_volume(&self) -> f64 {
        self.support_count() as f64 * self.grid.cell_volume()
    }

    /// Cell-counting measure of [f]_h = {f ≥ h}.
    pub fn superlevel_volume(&self, h: f64) -> f64 {
        self.values.iter().filter(|&&v| v >= h).count() as f64 * self.grid.cell_volume()
    }

    pub fn superlevel_count(&self, h: f64) -> usize {
        self.values.iter().filter(|&&v| v >= h).count()
    }

    /// μ(h) = |[f]_h| for strictly increasing positive levels.
    pub fn distribution_function(&self, levels: &[f64]) -> Result<Vec<f64>> {
        if levels.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidParameter("levels must be positive".into()));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("levels must be strictly increasing".into()));
        }
        let mut sorted: Vec<f64> = self.values.iter().copied().filter(|&v| v > 0.0).collect();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let cv = self.grid.cell_volume();
        Ok(levels.iter().map(|&h| (sorted.len() - sorted.partition_point(|&v| v < h)) as f64 * cv).collect())
    }

    /// Diameter of the support, taking each cell as a closed box. Zero for
    /// an empty support.
    pub fn diameter(&self) -> f64 {
        let dim = self.grid.dim();
        let h = self.grid.spacings();
        let s = self.grid.strides();
        let res = self.grid.resolution();
        // only cells on the support boundary can realize the diameter
        let mut pts: Vec<[f64; 3]> = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            let ix = self.grid.unravel(i);
            let boundary = (0..dim).any(|k| {
                ix[k] == 0 || ix[k] + 1 == res[k] || self.values[i - s[k]] <= 0.0 || self.values[i + s[k]] <= 0.0
            });
            if boundary {
                pts.push(self.grid.cell_center(i));
            }
        }
        let mut best = 0.0f64;
        for a in 0..pts.len() {
            for b in a..pts.len() {
                let d2: f64 = (0..dim).map(|k| ((pts[a][k] - pts[b][k]).abs() + h[k]).powi(2)).sum();
                best = best.max(d2);
            }
        }
        best.sqrt()
    }

    /// Multilinear interpolation of the cell-center samples; zero outside the
    /// box.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let dim = g.dim();
        let s = g.strides();
        let res = g.resolution();
        let mut base = [0i64; 3];
        let mut frac = [0.0; 3];
        for k in 0..dim {
            let mut t = (x[k] - g.lo[k]) / g.spacing(k) - 0.5;
            if !(t > -1.0 && t < res[k] as f64) {
                return 0.0;
            }
            // queries at cell centers reproduce the samples exactly
            if (t - t.round()).abs() < 1e-9 {
                t = t.round();
            }
            let fl = t.floor();
            base[k] = fl as i64;
            frac[k] = t - fl;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = 0usize;
            let mut inside = true;
            for k in 0..dim {
                let bit = (corner >> k) & 1;
                let i = base[k] + bit as i64;
                if i < 0 || i >= res[k] as i64 {
                    inside = false;
                    break;
                }
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                idx += i as usize * s[k];
            }
            if inside && w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }

    /// Sample of the cell containing x; zero outside the box.
    pub fn nearest_value(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let mut idx = 0;
        let s = g.strides();
        for k in 0..g.dim() {
            let t = ((x[k] - g.lo[k]) / g.spacing(k)).floor();
            if !(t >= 0.0 && t < g.resolution[k] as f64) {
                return 0.0;
            }
            idx += t as usize * s[k];
        }
        self.values[idx]
    }

    /// Central differences with zero extension outside the box.
    pub fn gradient(&self) -> GradientField {
        let g = &self.grid;
        let dim = g.dim();
        let s = g.strides();
        let h = g.spacings();
        let res = g.resolution();
        let n = g.len();
        let mut vectors = vec![0.0; n * dim];
        for i in 0..n {
            let ix = g.unravel(i);
            for k in 0..dim {
                let fwd = if ix[k] + 1 < res[k] { self.values[i + s[k]] } else { 0.0 };
                let bwd = if ix[k] > 0 { self.values[i - s[k]] } else { 0.0 };
                vectors[i * dim + k] = (fwd - bwd) / (2.0 * h[k]);
            }
        }
        GradientField { grid: g.clone(), vectors }
    }

    /// Per-cell v·∇f for a unit vector v.
    pub fn directional_derivative(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_unit(v, self.grid.dim())?;
        let grad = self.gradient();
        let dim = self.grid.dim();
        Ok(grad.vectors.chunks_exact(dim).map(|g| g.iter().zip(v).map(|(a, b)| a * b).sum()).collect())
    }

    /// Gradient components restricted to the support, laid out per axis,
    /// with cell-volume weights and the support volume as total mass.
    pub fn support_gradient(&self) -> SupportGradient {
        let grad = self.gradient();
        let dim = self.grid.dim();
        let mut components = vec![Vec::new(); dim];
        for (i, &v) in self.values.iter().enumerate() {
            if v > 0.0 {
                for (k, comp) in components.iter_mut().enumerate() {
                    comp.push(grad.vectors[i * dim + k]);
                }
            }
        }
        let count = components[0].len();
        let cv = self.grid.cell_volume();
        SupportGradient { components, weights: vec![cv; count], total_mass: cv * count as f64 }
    }

    /// Numerical co-area identity in the plane: returns
    /// (∫_{|∇f|>ε} g dx, ∫₀^∞ ∫_{f=h} g/|∇f| dH¹ dh), the level integrals taken
    /// over marching-squares contours of the cell-center lattice.
    pub fn coarea_check<G: Fn(&[f64]) -> f64>(&self, g: G, levels: usize) -> Result<CoareaReport> {
        if self.grid.dim() != 2 {
            return Err(Error::InvalidParameter("co-area check is implemented for n = 2".into()));
        }
        if levels == 0 {
            return Err(Error::InvalidParameter("need at least one level".into()));
        }
        let grid = &self.grid;
        let grad = self.gradient();
        let mags: Vec<f64> = grad.vectors.chunks_exact(2).map(|v| v[0].hypot(v[1])).collect();
        let fmax = self.max();
        let eps = plateau_threshold(self);
        let cv = grid.cell_volume();

        let mut lhs = 0.0;
        for i in 0..grid.len() {
            if self.values[i] > 0.0 && mags[i] > eps {
                let x = grid.cell_center(i);
                lhs += g(&x[..2]) * cv;
            }
        }
        if fmax == 0.0 {
            return Ok(CoareaReport { lhs, rhs: 0.0, levels, skipped_segments: 0 });
        }

        let (nx, ny) = (grid.resolution()[0], grid.resolution()[1]);
        let (hx, hy) = (grid.spacing(0), grid.spacing(1));
        let val = |i: usize, j: usize| self.values[i * ny + j];
        let mag = |i: usize, j: usize| mags[i * ny + j];
        let pos = |i: f64, j: f64| [grid.lo()[0] + (i + 0.5) * hx, grid.lo()[1] + (j + 0.5) * hy];
        let dh = fmax / levels as f64;
        let mut rhs = 0.0;
        let mut skipped = 0usize;
        for l in 0..levels {
            let level = (l as f64 + 0.5) * dh;
            let mut level_integral = 0.0;
            for i in 0..nx - 1 {
                for j in 0..ny - 1 {
                    let c = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
                    let segs = marching_square(c, level);
                    for (p, q) in segs.iter().flatten() {
                        // lattice coordinates relative to (i, j)
                        let a = pos(i as f64 + p[0], j as f64 + p[1]);
                        let b = pos(i as f64 + q[0], j as f64 + q[1]);
                        let len = (a[0] - b[0]).hypot(a[1] - b[1]);
                        let (mx, my) = (0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]));
                        let m = [mag(i, j), mag(i + 1, j), mag(i + 1, j + 1), mag(i, j + 1)];
                        let grad_mid = m[0] * (1.0 - mx) * (1.0 - my)
                            + m[1] * mx * (1.0 - my)
                            + m[2] * mx * my
                            + m[3] * (1.0 - mx) * my;
                        if len == 0.0 || grad_mid <= eps {
                            skipped += 1;
                            continue;
                        }
                        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                        level_integral += g(&mid) / grad_mid * len;
                    }
                }
            }
            rhs += level_integral * dh;
        }
        Ok(CoareaReport { lhs, rhs, levels, skipped_segments: skipped })
    }
}

/// |∇f| ≤ 10·spacing·max f marks a cell as flat.
pub fn plateau_threshold(f: &ScalarField) -> f64 {
    let h = (0..f.grid().dim()).map(|k| f.grid().spacing(k)).fold(0.0, f64::max);
    10.0 * h * f.max()
}

type Seg = ([f64; 2], [f64; 2]);

/// Contour segments of one lattice square with corners ordered
/// (0,0), (1,0), (1,1), (0,1); points are in unit-square coordinates.
fn marching_square(c: [f64; 4], level: f64) -> [Option<Seg>; 2] {
    let inside = |v: f64| v >= level;
    let case = (inside(c[0]) as u8) | (inside(c[1]) as u8) << 1 | (inside(c[2]) as u8) << 2 | (inside(c[3]) as u8) << 3;
    let lerp = |a: f64, b: f64| {
        let d = b - a;
        if d == 0.0 {
            0.5
        } else {
            ((level - a) / d).clamp(0.0, 1.0)
        }
    };
    // edge points: bottom (0-1), right (1-2), top (3-2), left (0-3)
    let bottom = || [lerp(c[0], c[1]), 0.0];
    let right = || [1.0, lerp(c[1], c[2])];
    let top = || [lerp(c[3], c[2]), 1.0];
    let left = || [0.0, lerp(c[0], c[3])];
    match case {
        0 | 15 => [None, None],
        1 | 14 => [Some((left(), bottom())), None],
        2 | 13 => [Some((bottom(), right())), None],
        3 | 12 => [Some((left(), right())), None],
        4 | 11 => [Some((right(), top())), None],
        6 | 9 => [Some((bottom(), top())), None],
        7 | 8 => [Some((left(), top())), None],
        5 | 10 => {
            let center = 0.25 * (c[0] + c[1] + c[2] + c[3]);
            let center_in = center >= level;
            // corners 0 and 2 inside (case 5) or 1 and 3 inside (case 10)
            if (case == 5) == center_in {
                [Some((left(), top())), Some((bottom(), right()))]
            } else {
                [Some((left(), bottom())), Some((right(), top()))]
            }
        }
        _ => unreachable!(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoareaReport {
    pub lhs: f64,
    pub rhs: f64,
    pub levels: usize,
    pub skipped_segments: usize,
}

impl CoareaReport {
    pub fn relative_gap(&self) -> f64 {
        let scale = self.lhs.abs().max(self.rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.lhs - self.rhs).abs() / scale
        }
    }
}

/// Per-cell gradient vectors, `dim` components per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    grid: Grid,
    vectors: Vec<f64>,
}

impl GradientField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn at(&self, idx: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.vectors[idx * d..(idx + 1) * d]
    }
}

/// Gradient samples on the support of a field, ready for norm solves.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportGradient {
    components: Vec<Vec<f64>>,
    weights: Vec<f64>,
    total_mass: f64,
}

impl SupportGradient {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k]
    }

    /// Writes v·∇f for every support cell into `out`.
    pub fn directional_into(&self, v: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.len(), 0.0);
        for (comp, &vk) in self.components.iter().zip(v) {
            for (o, &c) in out.iter_mut().zip(comp) {
                *o += vk * c;
            }
        }
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt()).collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitudes().into_iter().fold(0.0, f64::max)
    }
}

/// JSON sidecar written next to each binary field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub schema: String,
    pub dim: usize,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    pub resolution: Vec<usize>,
    pub integral: f64,
    pub max: f64,
    pub support_volume: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl FieldSidecar {
    pub fn describe(field: &ScalarField, label: Option<String>) -> Self {
        let g = field.grid();
        Self {
            schema: "v1".into(),
            dim: g.dim(),
            bounds: (0..g.dim()).map(|k| [g.lo()[k], g.hi()[k]]).collect(),
            resolution: g.resolution().to_vec(),
            integral: field.integral(),
            max: field.max(),
            support_volume: field.support_volume(),
            label,
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Binary layout, all little-endian 64-bit: dim (u64), then (lo, hi) per
/// axis (f64), then the resolution per axis (u64), then the row-major
/// payload (f64).
pub fn encode_field(field: &ScalarField) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(8 * (1 + 3 * g.dim() + g.len()));
    out.extend_from_slice(&(g.dim() as u64).to_le_bytes());
    for k in 0..g.dim() {
        out.extend_from_slice(&g.lo()[k].to_le_bytes());
        out.extend_from_slice(&g.hi()[k].to_le_bytes());
    }
    for &r in g.resolution() {
        out.extend_from_slice(&(r as u64).to_le_bytes());
    }
    for &v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<ScalarField> {
    let word = |i: usize| -> Result<[u8; 8]> {
        bytes
            .get(8 * i..8 * i + 8)
            .map(|s| s.try_into().expect("8-byte slice"))
            .ok_or_else(|| Error::Format(format!("truncated at word {i}")))
    };
    let dim = u64::from_le_bytes(word(0)?) as usize;
    if !(dim == 2 || dim == 3) {
        return Err(Error::Format(format!("unsupported dimension {dim}")));
    }
    let mut lo = Vec::with_capacity(dim);
    let mut hi = Vec::with_capacity(dim);
    for k in 0..dim {
        lo.push(f64::from_le_bytes(word(1 + 2 * k)?));
        hi.push(f64::from_le_bytes(word(2 + 2 * k)?));
    }
    let mut resolution = Vec::with_capacity(dim);
    for k in 0..dim {
        resolution.push(u64::from_le_bytes(word(1 + 2 * dim + k)?) as usize);
    }
    let grid = Grid::new(lo, hi, resolution)?;
    let header = 1 + 3 * dim;
    let expected = 8 * (header + grid.len());
    if bytes.len() != expected {
        return Err(Error::Format(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let values =
        bytes[8 * header..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    ScalarField::new(grid, values)
}

/// Writes the binary file and its `.json` sidecar.
pub fn write_field(path: &Path, field: &ScalarField, label: Option<String>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_field(field))?;
    let sidecar = FieldSidecar::describe(field, label);
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    decode_field(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn cone(res: usize, half: f64) -> ScalarField {
        ScalarField::sample(Grid::cube(2, half, res).unwrap(), |x| 1.0 - x[0].hypot(x[1])).unwrap()
    }

    #[test]
    fn grid_rejects_bad_boxes() {
        assert!(Grid::new(vec![0.0, 0.0], vec![1.0, 0.0], vec![32, 32]).is_err());
        assert!(Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![32, 8]).is_err());
        assert!(Grid::new(vec![0.0], vec![1.0], vec![32]).is_err());
        let g = Grid::new(vec![-1.0, 0.0], vec![1.0, 4.0], vec![20, 40]).unwrap();
        assert_abs_diff_eq!(g.spacing(0), 0.1);
        assert_abs_diff_eq!(g.spacing(1), 0.1);
        assert_eq!(g.ravel(&g.unravel(437)), 437);
    }

    #[test]
    fn band_is_enforced() {
        let g = Grid::cube(2, 1.0, 16).unwrap();
        let mut vals = vec![0.0; g.len()];
        vals[0] = 1.0;
        assert!(ScalarField::new(g.clone(), vals).is_err());
        assert!(ScalarField::sample(g.clone(), |_| 1.0).is_err());
        assert!(ScalarField::new(g, vec![-1.0; 256]).is_err());
    }

    #[test]
    fn zero_field_has_zero_gradient() {
        let f = ScalarField::zeros(Grid::cube(2, 1.0, 32).unwrap());
        assert!(f.gradient().vectors().iter().all(|&v| v == 0.0));
        assert_eq!(f.support_volume(), 0.0);
        assert_eq!(f.diameter(), 0.0);
        assert_eq!(f.distribution_function(&[0.1, 0.2]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn cone_gradient_points_inward() {
        let f = cone(128, 2.0);
        let g = f.gradient();
        // cell center nearest to (0.5, 0)
        let h = f.grid().spacing(0);
        let i = ((0.5 + 2.0) / h) as usize;
        let j = (2.0 / h) as usize;
        let idx = f.grid().ravel(&[i, j]);
        let x = f.grid().cell_center(idx);
        let r = x[0].hypot(x[1]);
        let v = g.at(idx);
        assert_abs_diff_eq!(v[0], -x[0] / r, epsilon = 2.0 * h);
        assert_abs_diff_eq!(v[1], -x[1] / r, epsilon = 2.0 * h);
    }

    #[test]
    fn affine_functions_have_exact_interior_gradients() {
        let grid = Grid::cube(2, 1.0, 64).unwrap();
        let f = ScalarField::sample(grid, |x| {
            if x[0].abs() < 0.8 && x[1].abs() < 0.8 {
                2.0 + 0.7 * x[0] - 0.3 * x[1]
            } else {
                0.0
            }
        })
        .unwrap();
        let g = f.gradient();
        for i in 0..f.grid().len() {
            let x = f.grid().cell_center(i);
            if x[0].abs() < 0.75 && x[1].abs() < 0.75 {
                assert_abs_diff_eq!(g.at(i)[0], 0.7, epsilon = 1e-12);
                assert_abs_diff_eq!(g.at(i)[1], -0.3, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn directional_derivative_is_odd_in_direction() {
        let f = cone(64, 1.2);
        let v = [0.6, 0.8];
        let a = f.directional_derivative(&v).unwrap();
        let b = f.directional_derivative(&[-0.6, -0.8]).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x + y == 0.0));
        let e1 = f.directional_derivative(&[1.0, 0.0]).unwrap();
        let g = f.gradient();
        assert!((0..f.grid().len()).all(|i| e1[i] == g.at(i)[0]));
        assert!(f.directional_derivative(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn measures_of_the_cone() {
        let f = cone(256, 1.1);
        assert!((f.support_volume() - PI).abs() / PI < 0.02);
        assert!((f.superlevel_volume(0.5) - PI / 4.0).abs() / (PI / 4.0) < 0.02);
        assert_eq!(f.superlevel_volume(1.5), 0.0);
        assert_abs_diff_eq!(f.superlevel_volume(1e-12), f.support_volume());
        let mu = f.distribution_function(&[0.25, 0.5, 0.75]).unwrap();
        for (m, e) in mu.iter().zip([9.0 * PI / 16.0, PI / 4.0, PI / 16.0]) {
            assert!((m - e).abs() / e < 0.02, "{m} vs {e}");
        }
        assert!(f.distribution_function(&[0.5, 0.25]).is_err());
        let d = f.diameter();
        assert!((d - 2.0).abs() <= f.grid().cell_diagonal(), "{d}");
    }

    #[test]
    fn single_cell_diameter_is_cell_diagonal() {
        let g = Grid::cube(2, 1.0, 32).unwrap();
        let mut vals = vec![0.0; g.len()];
        vals[g.ravel(&[10, 12])] = 1.0;
        let f = ScalarField::new(g, vals).unwrap();
        assert_abs_diff_eq!(f.diameter(), f.grid().cell_diagonal(), epsilon = 1e-14);
    }

    #[test]
    fn plateau_minus_band() {
        let g = Grid::cube(2, 1.0, 32).unwrap();
        let f = ScalarField::sample(g.clone(), |x| {
            if x[0].abs() < 1.0 - 2.0 / 16.0 && x[1].abs() < 1.0 - 2.0 / 16.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let side = 2.0 - 4.0 * g.spacing(0);
        assert_abs_diff_eq!(f.support_volume(), side * side, epsilon = 1e-12);
        let mu = f.distribution_function(&[0.5, 1.0, 1.5]).unwrap();
        assert_abs_diff_eq!(mu[0], side * side, epsilon = 1e-12);
        assert!(mu[0] == mu[1] && mu[2] == 0.0);
    }

    #[test]
    fn interpolation_reproduces_samples_and_vanishes_outside() {
        let f = cone(32, 1.2);
        for i in (0..f.grid().len()).step_by(7) {
            let x = f.grid().cell_center(i);
            assert_abs_diff_eq!(f.value_at(&x[..2]), f.values()[i], epsilon = 1e-14);
        }
        assert_eq!(f.value_at(&[5.0, 0.0]), 0.0);
    }

    #[test]
    fn coarea_on_the_cone() {
        let f = cone(256, 1.1);
        let rep = f.coarea_check(|_| 1.0, 256).unwrap();
        assert!((rep.lhs - PI).abs() / PI < 0.03, "{rep:?}");
        assert!(rep.relative_gap() <= 0.03, "{rep:?}");
        let zero = f.coarea_check(|_| 0.0, 64).unwrap();
        assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));
    }

    #[test]
    fn coarea_excludes_the_plateau() {
        let f = ScalarField::sample(Grid::cube(2, 1.1, 256).unwrap(), |x| (2.0 * (1.0 - x[0].hypot(x[1]))).min(1.0))
            .unwrap();
        let rep = f.coarea_check(|_| 1.0, 256).unwrap();
        // direct oracle: cells with |∇f| above the plateau threshold
        let eps = plateau_threshold(&f);
        let grad = f.gradient();
        let cv = f.grid().cell_volume();
        let oracle: f64 = (0..f.grid().len())
            .filter(|&i| {
                f.values()[i] > 0.0 && {
                    let g = grad.at(i);
                    g[0].hypot(g[1]) > eps
                }
            })
            .count() as f64
            * cv;
        assert_abs_diff_eq!(rep.lhs, oracle, epsilon = 1e-10);
        assert!((rep.lhs - 0.75 * PI).abs() / (0.75 * PI) < 0.03, "{rep:?}");
        assert!(rep.relative_gap() <= 0.03, "{rep:?}");
    }

    #[test]
    fn binary_round_trip_and_truncation() {
        let f = cone(24, 1.3);
        let bytes = encode_field(&f);
        assert_eq!(bytes.len(), 8 * (1 + 6 + 24 * 24));
        assert_eq!(&bytes[..8], &2u64.to_le_bytes());
        assert_eq!(decode_field(&bytes).unwrap(), f);
        assert!(decode_field(&bytes[..bytes.len() - 8]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cone.field");
        write_field(&path, &f, Some("cone".into())).unwrap();
        assert_eq!(read_field(&path).unwrap(), f);
        let side: FieldSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(side.resolution, vec![24, 24]);
        assert_eq!(side.label.as_deref(), Some("cone"));
    }
}
