//! Spherical quadrature, radial bodies, and the affine ball B_φ(f) of a
//! field: the unit ball of v ↦ ‖∇ᵥf‖_φ, stored through its radial function
//! ρ(u) = 1/‖u‖ at the quadrature nodes.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::luxemburg::{self, c_phi, NormOutcome};
use crate::orlicz::OrliczFunction;
use crate::scalar_field::{check_unit, Grid, ScalarField, BAND};

pub const DEFAULT_NODES_2D: usize = 512;
pub const DEFAULT_NODES_3D: usize = 2048;

/// Volume of the unit ball in ℝⁿ for n ∈ {1, 2, 3}.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("unsupported dimension {n}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalQuadrature {
    dim: usize,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

/// Uniform angles on S¹ or a Fibonacci point set on S², with equal weights.
pub fn make_quadrature(dim: usize, count: usize) -> Result<SphericalQuadrature> {
    if count < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 nodes, got {count}")));
    }
    let nodes: Vec<[f64; 3]> = match dim {
        2 => (0..count)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / count as f64;
                [t.cos(), t.sin(), 0.0]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let a = golden * i as f64;
                    [r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}"))),
    };
    let total = if dim == 2 { 2.0 * PI } else { 4.0 * PI };
    Ok(SphericalQuadrature { dim, nodes, weights: vec![total / count as f64; count] })
}

impl SphericalQuadrature {
    pub fn default_for(dim: usize) -> Result<Self> {
        make_quadrature(dim, if dim == 2 { DEFAULT_NODES_2D } else { DEFAULT_NODES_3D })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i][..self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.nodes.iter().map(move |n| &n[..self.dim])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Σ wᵢ g(uᵢ).
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, g: F) -> f64 {
        self.nodes().zip(&self.weights).map(|(u, w)| w * g(u)).sum()
    }

    /// Polar angle of node i (n = 2).
    pub fn angle(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.len() as f64
    }

    /// Index of the node closest to −uᵢ.
    pub fn antipode(&self, i: usize) -> usize {
        if self.dim == 2 && self.len().is_multiple_of(2) {
            return (i + self.len() / 2) % self.len();
        }
        let u = self.node(i);
        let mut best = (f64::INFINITY, i);
        for (j, w) in self.nodes().enumerate() {
            let d: f64 = u.iter().zip(w).map(|(a, b)| (a + b) * (a + b)).sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        best.1
    }
}

/// A body given by positive radial values at quadrature nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialBody {
    quadrature: SphericalQuadrature,
    radial: Vec<f64>,
}

impl RadialBody {
    pub fn new(quadrature: SphericalQuadrature, radial: Vec<f64>) -> Result<Self> {
        if radial.len() != quadrature.len() {
            return Err(Error::DimensionMismatch { expected: quadrature.len(), got: radial.len() });
        }
        if let Some(i) = radial.iter().position(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "radial value {} at node {i} is not positive and finite",
                radial[i]
            )));
        }
        Ok(Self { quadrature, radial })
    }

    pub fn quadrature(&self) -> &SphericalQuadrature {
        &self.quadrature
    }

    pub fn radial(&self) -> &[f64] {
        &self.radial
    }

    pub fn dim(&self) -> usize {
        self.quadrature.dim()
    }

    /// (1/n) Σ wᵢ ρᵢⁿ.
    pub fn volume(&self) -> f64 {
        let n = self.dim() as i32;
        self.radial.iter().zip(self.quadrature.weights()).map(|(r, w)| w * r.powi(n)).sum::<f64>() / n as f64
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.quadrature.clone(), self.radial.iter().map(|r| c * r).collect())
    }

    /// h(u) = maxᵢ ρᵢ (u·uᵢ), the support function of the hull of the samples.
    pub fn support(&self, u: &[f64]) -> f64 {
        self.quadrature
            .nodes()
            .zip(&self.radial)
            .map(|(w, r)| r * u.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// maxᵢ |ln(ρ(uᵢ)/ρ(−uᵢ))|; zero for centrally symmetric bodies.
    pub fn symmetry_defect(&self) -> f64 {
        (0..self.radial.len())
            .map(|i| (self.radial[i] / self.radial[self.quadrature.antipode(i)]).ln().abs())
            .fold(0.0, f64::max)
    }

    /// `angle,rho` rows for n = 2, `x,y,z,rho` rows for n = 3.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.dim() == 2 {
            out.push_str("angle,rho\n");
            for (i, r) in self.radial.iter().enumerate() {
                let _ = writeln!(out, "{},{}", self.quadrature.angle(i), r);
            }
        } else {
            out.push_str("x,y,z,rho\n");
            for (u, r) in self.quadrature.nodes().zip(&self.radial) {
                let _ = writeln!(out, "{},{},{},{}", u[0], u[1], u[2], r);
            }
        }
        out
    }
}

pub fn body_volume(k: &RadialBody) -> f64 {
    k.volume()
}

/// Per-node solver diagnostics collected while building an affine ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSolve {
    pub body: RadialBody,
    /// maxᵢ |m(λᵢ) − 1| over the node solves.
    pub max_residual: f64,
    pub total_iterations: usize,
}

/// Directional norms ‖uᵢ‖_{f,φ} at every node, solved with warm starts from
/// the previous node. Nodes where φ never sees ∇ᵤf are reported by index.
pub fn directional_norms(
    f: &ScalarField,
    phi: &OrliczFunction,
    q: &SphericalQuadrature,
) -> Result<(Vec<f64>, f64, usize)> {
    if q.dim() != f.grid().dim() {
        return Err(Error::DimensionMismatch { expected: f.grid().dim(), got: q.dim() });
    }
    let sg = f.support_gradient();
    if sg.is_empty() {
        return Err(Error::DegenerateNorm("field has empty support".into()));
    }
    let mut buf = Vec::with_capacity(sg.len());
    let mut norms = Vec::with_capacity(q.len());
    let mut hint = None;
    let mut max_residual = 0.0f64;
    let mut iterations = 0;
    for (i, u) in q.nodes().enumerate() {
        sg.directional_into(u, &mut buf);
        match luxemburg::solve_raw(&buf, sg.weights(), sg.total_mass(), phi, hint)? {
            NormOutcome::Root(r) => {
                max_residual = max_residual.max((r.modular - 1.0).abs());
                iterations += r.iterations;
                hint = Some(r.lambda);
                norms.push(r.lambda);
            }
            NormOutcome::Zero => return Err(Error::DegenerateNorm(format!("zero directional derivative at node {i}"))),
            NormOutcome::Unbounded => {
                return Err(Error::DegenerateNorm(format!(
                    "directional derivative at node {i} never enters the sensitive side of {}",
                    phi.label()
                )))
            }
        }
    }
    Ok((norms, max_residual, iterations))
}

pub fn affine_ball_detailed(f: &ScalarField, phi: &OrliczFunction, q: &SphericalQuadrature) -> Result<BallSolve> {
    let (norms, max_residual, total_iterations) = directional_norms(f, phi, q)?;
    let body = RadialBody::new(q.clone(), norms.iter().map(|n| 1.0 / n).collect())?;
    Ok(BallSolve { body, max_residual, total_iterations })
}

/// B_φ(f) with ρ(uᵢ) = 1/‖uᵢ‖_{f,φ}.
pub fn affine_ball(f: &ScalarField, phi: &OrliczFunction, q: &SphericalQuadrature) -> Result<RadialBody> {
    Ok(affine_ball_detailed(f, phi, q)?.body)
}

/// E_φ(f) = |B_φ(f)|^{−1/n}.
pub fn energy(f: &ScalarField, phi: &OrliczFunction, q: &SphericalQuadrature) -> Result<f64> {
    Ok(energy_of(&affine_ball(f, phi, q)?))
}

pub fn energy_of(ball: &RadialBody) -> f64 {
    ball.volume().powf(-1.0 / ball.dim() as f64)
}

/// A dim × dim matrix stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub dim: usize,
    pub m: [[f64; 3]; 3],
}

impl Matrix {
    pub fn identity(dim: usize) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate().take(dim) {
            row[i] = 1.0;
        }
        Self { dim, m }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if !(dim == 2 || dim == 3) || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter("matrix must be 2×2 or 3×3".into()));
        }
        let mut m = [[0.0; 3]; 3];
        for i in 0..dim {
            m[i][..dim].copy_from_slice(&rows[i]);
        }
        Ok(Self { dim, m })
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.m[i][..self.dim].to_vec()).collect()
    }

    pub fn apply(&self, x: &[f64]) -> [f64; 3] {
        let mut y = [0.0; 3];
        for i in 0..self.dim {
            y[i] = (0..self.dim).map(|j| self.m[i][j] * x[j]).sum();
        }
        y
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let mut m = [[0.0; 3]; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[i][j] = (0..self.dim).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Matrix { dim: self.dim, m }
    }

    pub fn transpose(&self) -> Matrix {
        let mut m = [[0.0; 3]; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[i][j] = self.m[j][i];
            }
        }
        Matrix { dim: self.dim, m }
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        if self.dim == 2 {
            m[0][0] * m[1][1] - m[0][1] * m[1][0]
        } else {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let d = self.det();
        if d.abs() < 1e-300 {
            return Err(Error::InvalidParameter("singular matrix".into()));
        }
        let m = &self.m;
        let mut inv = [[0.0; 3]; 3];
        if self.dim == 2 {
            inv[0][0] = m[1][1] / d;
            inv[0][1] = -m[0][1] / d;
            inv[1][0] = -m[1][0] / d;
            inv[1][1] = m[0][0] / d;
        } else {
            for i in 0..3 {
                for j in 0..3 {
                    let (a, b) = ((j + 1) % 3, (j + 2) % 3);
                    let (c, e) = ((i + 1) % 3, (i + 2) % 3);
                    inv[i][j] = (m[a][c] * m[b][e] - m[a][e] * m[b][c]) / d;
                }
            }
        }
        Ok(Matrix { dim: self.dim, m: inv })
    }

    /// Ratio of the extreme singular values.
    pub fn condition_number(&self) -> f64 {
        let ata = self.transpose().mul(self);
        let eig = symmetric_eigenvalues(&ata);
        let max = eig.iter().cloned().fold(0.0, f64::max);
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        (max / min).sqrt()
    }
}

fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    let m = &a.m;
    if a.dim == 2 {
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        return vec![0.5 * tr + disc, 0.5 * tr - disc];
    }
    // closed form for symmetric 3×3 matrices
    let p1 = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if p1 == 0.0 {
        return vec![m[0][0], m[1][1], m[2][2]];
    }
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = Matrix::identity(3);
    for i in 0..3 {
        for j in 0..3 {
            b.m[i][j] = (m[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let r = (b.det() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    vec![e1, 3.0 * q - e1 - e3, e3]
}

pub fn rotation_2d(angle: f64) -> Matrix {
    let (s, c) = angle.sin_cos();
    Matrix { dim: 2, m: [[c, -s, 0.0], [s, c, 0.0], [0.0; 3]] }
}

fn rotation_3d<R: Rng + ?Sized>(rng: &mut R) -> Matrix {
    // uniform unit quaternion
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) =
        (a * (2.0 * PI * u2).sin(), a * (2.0 * PI * u2).cos(), b * (2.0 * PI * u3).sin(), b * (2.0 * PI * u3).cos());
    Matrix {
        dim: 3,
        m: [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
            [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
            [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
        ],
    }
}

/// A random element of SL(n) of the form rotation·diag·rotation with
/// condition number at most `max_cond`.
pub fn random_sl<R: Rng + ?Sized>(dim: usize, max_cond: f64, rng: &mut R) -> Result<Matrix> {
    if !(max_cond >= 1.0) {
        return Err(Error::InvalidParameter("max_cond must be at least 1".into()));
    }
    match dim {
        2 => {
            let s = max_cond.sqrt().powf(rng.gen::<f64>());
            let d = Matrix { dim: 2, m: [[s, 0.0, 0.0], [0.0, 1.0 / s, 0.0], [0.0; 3]] };
            let r1 = rotation_2d(rng.gen::<f64>() * 2.0 * PI);
            let r2 = rotation_2d(rng.gen::<f64>() * 2.0 * PI);
            Ok(r1.mul(&d).mul(&r2))
        }
        3 => {
            // singular values s₁ ≥ s₂ ≥ s₃ with s₁s₂s₃ = 1 and s₁/s₃ ≤ max_cond
            let ln_c = max_cond.ln() * rng.gen::<f64>();
            let t = rng.gen::<f64>();
            let l1 = ln_c * (2.0 - t) / 3.0;
            let l3 = l1 - ln_c;
            let l2 = -l1 - l3;
            let d = Matrix { dim: 3, m: [[l1.exp(), 0.0, 0.0], [0.0, l2.exp(), 0.0], [0.0, 0.0, l3.exp()]] };
            Ok(rotation_3d(rng).mul(&d).mul(&rotation_3d(rng)))
        }
        _ => Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}"))),
    }
}

/// Resamples g(x) = f(c + A(x − c)) with c the box center, by multilinear
/// interpolation. Errors when det A ≠ 1 or the transformed support would
/// reach the boundary band.
pub fn sl_transform(f: &ScalarField, a: &Matrix) -> Result<ScalarField> {
    let grid = f.grid();
    let dim = grid.dim();
    if a.dim != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: a.dim });
    }
    if (a.det() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("det A = {} is not 1", a.det())));
    }
    let c = grid.box_center();
    let inv = a.inverse()?;
    // the image of every support cell must stay clear of the band
    let margin = BAND as f64 + 1.0;
    for (i, &v) in f.values().iter().enumerate() {
        if v > 0.0 {
            let x = grid.cell_center(i);
            let mut d = [0.0; 3];
            for k in 0..dim {
                d[k] = x[k] - c[k];
            }
            let y = inv.apply(&d);
            let mut p = [0.0; 3];
            for k in 0..dim {
                p[k] = c[k] + y[k];
            }
            if !grid.contains_with_margin(&p[..dim], margin) {
                return Err(Error::SupportOutsideBox { context: "SL transform".into() });
            }
        }
    }
    Ok(resample(f, grid, |x| {
        let mut d = [0.0; 3];
        for k in 0..dim {
            d[k] = x[k] - c[k];
        }
        let y = a.apply(&d);
        let mut p = [0.0; 3];
        for k in 0..dim {
            p[k] = c[k] + y[k];
        }
        p
    }))
}

/// out(x) = f(map(x)) at every cell center of `target`, band zeroed. Cells
/// whose preimage falls in a zero cell stay zero, so the support does not
/// grow by an interpolation halo.
pub(crate) fn resample<M: Fn(&[f64]) -> [f64; 3]>(f: &ScalarField, target: &Grid, map: M) -> ScalarField {
    let dim = target.dim();
    let values = (0..target.len())
        .map(|i| {
            let x = target.cell_center(i);
            let p = map(&x[..dim]);
            if f.nearest_value(&p[..dim]) > 0.0 {
                f.value_at(&p[..dim])
            } else {
                0.0
            }
        })
        .collect();
    ScalarField::from_values_clamped(target.clone(), values)
}

/// The two sides of ∫f / (c_φ |G| D_G) ≤ ‖v‖_{f,φ} ≤ sup|∇f| / c_φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormBounds {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

impl NormBounds {
    pub fn holds(&self) -> bool {
        self.lower <= self.value && self.value <= self.upper
    }
}

pub fn norm_bounds_check(f: &ScalarField, phi: &OrliczFunction, v: &[f64]) -> Result<NormBounds> {
    check_unit(v, f.grid().dim())?;
    let c = c_phi(phi);
    let (g, d) = (f.support_volume(), f.diameter());
    if g == 0.0 {
        return Err(Error::DegenerateNorm("field has empty support".into()));
    }
    let value = luxemburg::directional_norm(f, v, phi)?;
    Ok(NormBounds { lower: f.integral() / (c * g * d), value, upper: f.support_gradient().max_magnitude() / c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cone(res: usize) -> ScalarField {
        ScalarField::sample(Grid::cube(2, 1.1, res).unwrap(), |x| 1.0 - x[0].hypot(x[1])).unwrap()
    }

    #[test]
    fn quadrature_examples() {
        let q = make_quadrature(2, 4).unwrap();
        let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (u, e) in q.nodes().zip(expect) {
            assert_abs_diff_eq!(u[0], e[0], epsilon = 1e-15);
            assert_abs_diff_eq!(u[1], e[1], epsilon = 1e-15);
        }
        assert!(q.weights().iter().all(|&w| w == PI / 2.0));
        let q = make_quadrature(2, 512).unwrap();
        assert_abs_diff_eq!(q.total_weight(), 2.0 * PI, epsilon = 1e-12);
        let q3 = make_quadrature(3, 1000).unwrap();
        assert_abs_diff_eq!(q3.total_weight(), 4.0 * PI, epsilon = 1e-10);
        assert!(q3.nodes().all(|u| (u.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12));
        assert!(make_quadrature(4, 10).is_err());
    }

    #[test]
    fn quadrature_integrates_quadratics() {
        let q = make_quadrature(2, 256).unwrap();
        assert_abs_diff_eq!(q.integrate(|u| u[0] * u[0]), PI, epsilon = 1e-6);
        assert_abs_diff_eq!(q.integrate(|u| u[0] * u[1]), 0.0, epsilon = 1e-6);
        let q3 = make_quadrature(3, 2048).unwrap();
        assert!((q3.integrate(|u| u[2] * u[2]) - 4.0 * PI / 3.0).abs() < 1e-3);
    }

    #[test]
    fn disk_volumes() {
        let q = make_quadrature(2, 512).unwrap();
        let disk = RadialBody::new(q.clone(), vec![1.0; 512]).unwrap();
        assert_abs_diff_eq!(disk.volume(), PI, epsilon = 1e-3);
        let big = disk.scaled(2f64.sqrt()).unwrap();
        assert!((big.volume() - 2.0 * PI).abs() / (2.0 * PI) < 0.005);
        assert_abs_diff_eq!(disk.scaled(3.0).unwrap().volume(), 9.0 * disk.volume(), epsilon = 1e-12);
        assert!(RadialBody::new(q, vec![0.0; 512]).is_err());
    }

    #[test]
    fn cone_ball_is_the_sqrt2_disk() {
        let f = cone(256);
        let q = make_quadrature(2, 64).unwrap();
        let phi = OrliczFunction::power(2.0).unwrap();
        let solve = affine_ball_detailed(&f, &phi, &q).unwrap();
        assert!(solve.max_residual <= 1e-10);
        for r in solve.body.radial() {
            assert!((r - 2f64.sqrt()).abs() / 2f64.sqrt() < 0.01, "{r}");
        }
        let e = energy_of(&solve.body);
        assert!((e - (2.0 * PI).powf(-0.5)).abs() / (2.0 * PI).powf(-0.5) < 0.01);
        assert!(solve.body.symmetry_defect() < 1e-8);
    }

    #[test]
    fn sl_transform_identity_and_mass() {
        let f = ScalarField::sample(Grid::cube(2, 1.0, 96).unwrap(), |x| {
            (1.0 - ((x[0] - 0.1).powi(2) / 0.16 + x[1].powi(2) / 0.09)).max(0.0).powi(2)
        })
        .unwrap();
        assert_eq!(sl_transform(&f, &Matrix::identity(2)).unwrap(), f);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_sl(2, 4.0, &mut rng).unwrap();
        assert_abs_diff_eq!(a.det(), 1.0, epsilon = 1e-12);
        assert!(a.condition_number() <= 4.0 + 1e-9);
        let g = sl_transform(&f, &a).unwrap();
        assert!((g.integral() - f.integral()).abs() / f.integral() < 0.01);
        let bad = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(sl_transform(&f, &bad).is_err());
        let stretch = Matrix::from_rows(&[vec![0.2, 0.0], vec![0.0, 5.0]]).unwrap();
        assert!(matches!(sl_transform(&f, &stretch), Err(Error::SupportOutsideBox { .. })));
    }

    #[test]
    fn rotating_a_radial_field() {
        let f = cone(128);
        let g = sl_transform(&f, &rotation_2d(PI / 4.0)).unwrap();
        assert!(f.l1_distance(&g).unwrap() / f.integral() < 0.01);
    }

    #[test]
    fn random_sl_in_three_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_sl(3, 4.0, &mut rng).unwrap();
            assert_abs_diff_eq!(a.det(), 1.0, epsilon = 1e-10);
            assert!(a.condition_number() <= 4.0 + 1e-8);
            let p = a.mul(&a.inverse().unwrap());
            for i in 0..3 {
                for j in 0..3 {
                    assert_abs_diff_eq!(p.m[i][j], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn cone_norm_bounds() {
        let f = cone(256);
        let phi = OrliczFunction::power(2.0).unwrap();
        let b = norm_bounds_check(&f, &phi, &[1.0, 0.0]).unwrap();
        assert!((b.lower - 1.0 / 6.0).abs() < 0.01, "{b:?}");
        assert!((b.value - 0.5f64.sqrt()).abs() < 0.01);
        assert!((b.upper - 1.0).abs() < 0.01);
        assert!(b.holds());
    }

    #[test]
    fn csv_export_shapes() {
        let q = make_quadrature(2, 8).unwrap();
        let body = RadialBody::new(q, vec![1.5; 8]).unwrap();
        let csv = body.to_csv();
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.starts_with("angle,rho\n0,1.5\n"));
        let q3 = make_quadrature(3, 10).unwrap();
        let csv3 = RadialBody::new(q3, vec![1.0; 10]).unwrap().to_csv();
        assert!(csv3.starts_with("x,y,z,rho\n"));
    }
}
