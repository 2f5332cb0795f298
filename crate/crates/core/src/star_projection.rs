//! Star bodies given by radial samples, their gauges and gauge gradients,
//! polar bodies, and Orlicz projection bodies.
//!
//! In the plane the radial function is a periodic cubic spline in the polar
//! angle, so gauge gradients are analytic. In space it is a modified
//! Shepard interpolant over the quadrature nodes and gradients come from
//! finite differences.
//!
//! The projection body is computed on the sphere: with the cone-measure
//! substitution the boundary integral becomes
//! h(u) = root of λ ↦ Σ wᵢ ρᵢⁿ φ(u·∇g(wᵢ)/λ) / Σ wᵢ ρᵢⁿ = 1.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affine_ball::{make_quadrature, RadialBody, SphericalQuadrature};
use crate::error::{Error, Result};
use crate::luxemburg::{self, LuxemburgRoot, NormOutcome};
use crate::orlicz::OrliczFunction;
use crate::scalar_field::{check_unit, Grid, ScalarField};

/// A node is flagged as a corner when |ρ''| there exceeds this multiple of
/// (median |ρ''| + mean ρ).
const CORNER_FACTOR: f64 = 25.0;
/// Step for finite-difference gauge gradients in three dimensions.
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
struct PeriodicSpline {
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl PeriodicSpline {
    fn new(y: Vec<f64>) -> Self {
        let n = y.len();
        let h = 2.0 * PI / n as f64;
        let rhs: Vec<f64> =
            (0..n).map(|i| 6.0 / (h * h) * (y[(i + 1) % n] - 2.0 * y[i] + y[(i + n - 1) % n])).collect();
        // cyclic system M_{i−1} + 4M_i + M_{i+1} = rhs_i, strictly diagonally dominant
        let mut m = vec![0.0; n];
        let scale = rhs.iter().fold(0.0f64, |a, r| a.max(r.abs())).max(1e-300);
        for _ in 0..200 {
            let mut change = 0.0f64;
            for i in 0..n {
                let new = (rhs[i] - m[(i + n - 1) % n] - m[(i + 1) % n]) / 4.0;
                change = change.max((new - m[i]).abs());
                m[i] = new;
            }
            if change <= 1e-16 * scale {
                break;
            }
        }
        Self { h, y, m }
    }

    fn locate(&self, theta: f64) -> (usize, usize, f64) {
        let n = self.y.len();
        let t = theta.rem_euclid(2.0 * PI) / self.h;
        let i = (t.floor() as usize).min(n - 1);
        (i, (i + 1) % n, (t - i as f64) * self.h)
    }

    fn eval(&self, theta: f64) -> f64 {
        let (i, j, t) = self.locate(theta);
        let h = self.h;
        let s = h - t;
        self.m[i] * s * s * s / (6.0 * h)
            + self.m[j] * t * t * t / (6.0 * h)
            + (self.y[i] / h - self.m[i] * h / 6.0) * s
            + (self.y[j] / h - self.m[j] * h / 6.0) * t
    }

    fn derivative(&self, theta: f64) -> f64 {
        let (i, j, t) = self.locate(theta);
        let h = self.h;
        let s = h - t;
        -self.m[i] * s * s / (2.0 * h) + self.m[j] * t * t / (2.0 * h) - (self.y[i] / h - self.m[i] * h / 6.0)
            + (self.y[j] / h - self.m[j] * h / 6.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Shepard {
    nodes: Vec<[f64; 3]>,
    values: Vec<f64>,
    grads: Vec<[f64; 3]>,
    radius: f64,
}

fn tangent_basis(u: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let a = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = dot3(&a, u);
    let mut e1 = [a[0] - d * u[0], a[1] - d * u[1], a[2] - d * u[2]];
    let n1 = dot3(&e1, &e1).sqrt();
    e1.iter_mut().for_each(|x| *x /= n1);
    let e2 = [u[1] * e1[2] - u[2] * e1[1], u[2] * e1[0] - u[0] * e1[2], u[0] * e1[1] - u[1] * e1[0]];
    (e1, e2)
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl Shepard {
    fn new(q: &SphericalQuadrature, values: &[f64]) -> Self {
        let nodes: Vec<[f64; 3]> = q.nodes().map(|u| [u[0], u[1], u[2]]).collect();
        let radius = (80.0 / nodes.len() as f64).sqrt().min(1.0);
        // local linear nodal functions fitted in each tangent plane
        let grads = nodes
            .iter()
            .enumerate()
            .map(|(i, ui)| {
                let (e1, e2) = tangent_basis(ui);
                let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (j, uj) in nodes.iter().enumerate() {
                    if j == i || dist3(ui, uj) >= radius {
                        continue;
                    }
                    let d = [uj[0] - ui[0], uj[1] - ui[1], uj[2] - ui[2]];
                    let (s, t) = (dot3(&d, &e1), dot3(&d, &e2));
                    let dv = values[j] - values[i];
                    a11 += s * s;
                    a12 += s * t;
                    a22 += t * t;
                    b1 += s * dv;
                    b2 += t * dv;
                }
                let det = a11 * a22 - a12 * a12;
                if det.abs() < 1e-300 {
                    return [0.0; 3];
                }
                let ga = (a22 * b1 - a12 * b2) / det;
                let gb = (a11 * b2 - a12 * b1) / det;
                [ga * e1[0] + gb * e2[0], ga * e1[1] + gb * e2[1], ga * e1[2] + gb * e2[2]]
            })
            .collect();
        Self { nodes, values: values.to_vec(), grads, radius }
    }

    fn eval(&self, u: &[f64; 3]) -> f64 {
        let (mut acc, mut wsum) = (0.0, 0.0);
        let mut nearest = (f64::INFINITY, 0usize);
        for (i, ui) in self.nodes.iter().enumerate() {
            let d = dist3(u, ui);
            if d < 1e-14 {
                return self.values[i];
            }
            if d < nearest.0 {
                nearest = (d, i);
            }
            if d < self.radius {
                let w = ((self.radius - d) / (self.radius * d)).powi(2);
                let g = &self.grads[i];
                let local = self.values[i] + g[0] * (u[0] - ui[0]) + g[1] * (u[1] - ui[1]) + g[2] * (u[2] - ui[2]);
                acc += w * local;
                wsum += w;
            }
        }
        if wsum == 0.0 {
            self.values[nearest.1]
        } else {
            acc / wsum
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Interpolant {
    Spline(PeriodicSpline),
    Shepard(Shepard),
}

/// A star body with positive radial samples at the nodes of a spherical
/// quadrature and a smooth interpolant between them.
#[derive(Debug, Clone, PartialEq)]
pub struct StarBody {
    quadrature: SphericalQuadrature,
    radial: Vec<f64>,
    interp: Interpolant,
}

fn check_uniform_circle(q: &SphericalQuadrature) -> Result<()> {
    let m = q.len();
    for (i, u) in q.nodes().enumerate() {
        let t = 2.0 * PI * i as f64 / m as f64;
        if (u[0] - t.cos()).abs() > 1e-12 || (u[1] - t.sin()).abs() > 1e-12 {
            return Err(Error::InvalidParameter("planar star bodies need uniformly spaced angles".into()));
        }
    }
    Ok(())
}

impl StarBody {
    pub fn new(quadrature: SphericalQuadrature, radial: Vec<f64>) -> Result<Self> {
        let body = RadialBody::new(quadrature, radial)?;
        Self::from_radial_body(&body)
    }

    pub fn from_radial_body(body: &RadialBody) -> Result<Self> {
        let q = body.quadrature().clone();
        let radial = body.radial().to_vec();
        let interp = if q.dim() == 2 {
            check_uniform_circle(&q)?;
            Interpolant::Spline(PeriodicSpline::new(radial.clone()))
        } else {
            Interpolant::Shepard(Shepard::new(&q, &radial))
        };
        Ok(Self { quadrature: q, radial, interp })
    }

    /// ρ sampled from `rho(u)` at the nodes of a fresh quadrature.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(dim: usize, count: usize, rho: F) -> Result<Self> {
        let q = make_quadrature(dim, count)?;
        let radial = q.nodes().map(&rho).collect();
        Self::new(q, radial)
    }

    pub fn ball(dim: usize, count: usize, radius: f64) -> Result<Self> {
        Self::from_fn(dim, count, |_| radius)
    }

    /// The ellipse x²/a² + y²/b² ≤ 1.
    pub fn ellipse(a: f64, b: f64, count: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidParameter("ellipse axes must be positive".into()));
        }
        Self::from_fn(2, count, |u| 1.0 / ((u[0] / a).powi(2) + (u[1] / b).powi(2)).sqrt())
    }

    pub fn ellipsoid(axes: [f64; 3], count: usize) -> Result<Self> {
        if axes.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidParameter("ellipsoid axes must be positive".into()));
        }
        Self::from_fn(3, count, |u| {
            1.0 / ((u[0] / axes[0]).powi(2) + (u[1] / axes[1]).powi(2) + (u[2] / axes[2]).powi(2)).sqrt()
        })
    }

    /// ρ(θ) = 1 + Σ_{k=1}^{6} a_k cos(kθ + b_k), clipped below at 0.2, with
    /// a_k uniform in [0, amplitude/k] and b_k uniform phases.
    pub fn random_star(count: usize, amplitude: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<(f64, f64)> =
            (1..=6).map(|k| (rng.gen::<f64>() * amplitude / k as f64, rng.gen::<f64>() * 2.0 * PI)).collect();
        Self::from_fn(2, count, |u| {
            let t = u[1].atan2(u[0]);
            let r = 1.0 + coeffs.iter().enumerate().map(|(k, (a, b))| a * ((k + 1) as f64 * t + b).cos()).sum::<f64>();
            r.max(0.2)
        })
    }

    pub fn dim(&self) -> usize {
        self.quadrature.dim()
    }

    pub fn quadrature(&self) -> &SphericalQuadrature {
        &self.quadrature
    }

    pub fn radial(&self) -> &[f64] {
        &self.radial
    }

    pub fn to_radial_body(&self) -> RadialBody {
        RadialBody::new(self.quadrature.clone(), self.radial.clone()).expect("validated at construction")
    }

    /// |K| = (1/n) Σ wᵢ ρᵢⁿ.
    pub fn volume(&self) -> f64 {
        self.to_radial_body().volume()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.quadrature.clone(), self.radial.iter().map(|r| c * r).collect())
    }

    /// Interpolated radial function along the direction of x ≠ 0, i.e.
    /// ρ(x/|x|).
    pub fn radial_at(&self, x: &[f64]) -> f64 {
        match &self.interp {
            Interpolant::Spline(s) => s.eval(x[1].atan2(x[0])),
            Interpolant::Shepard(s) => {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                s.eval(&[x[0] / r, x[1] / r, x[2] / r])
            }
        }
    }

    /// Radial function at polar angle θ (n = 2).
    pub fn radial_at_angle(&self, theta: f64) -> f64 {
        match &self.interp {
            Interpolant::Spline(s) => s.eval(theta),
            Interpolant::Shepard(_) => self.radial_at(&[theta.cos(), theta.sin(), 0.0]),
        }
    }

    /// g_K(x) = |x| / ρ(x/|x|).
    pub fn gauge(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return Err(Error::InvalidParameter("gauge needs a nonzero point".into()));
        }
        Ok(self.gauge_unchecked(x, r))
    }

    fn gauge_unchecked(&self, x: &[f64], r: f64) -> f64 {
        r / self.radial_at(x)
    }

    /// ∇g_K at x ≠ 0; homogeneous of degree 0.
    pub fn gauge_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return Err(Error::InvalidParameter("gauge gradient needs a nonzero point".into()));
        }
        Ok(self.gauge_gradient_unchecked(x, r))
    }

    fn gauge_gradient_unchecked(&self, x: &[f64], r: f64) -> Vec<f64> {
        match &self.interp {
            Interpolant::Spline(s) => {
                let theta = x[1].atan2(x[0]);
                let (rho, drho) = (s.eval(theta), s.derivative(theta));
                let (c, sn) = (x[0] / r, x[1] / r);
                // ∇g = e_r/ρ − ρ′ e_θ/ρ²
                let a = 1.0 / rho;
                let b = -drho / (rho * rho);
                vec![a * c - b * sn, a * sn + b * c]
            }
            Interpolant::Shepard(_) => {
                let u = [x[0] / r, x[1] / r, x[2] / r];
                (0..3)
                    .map(|k| {
                        let mut p = u;
                        let mut m = u;
                        p[k] += FD_STEP;
                        m[k] -= FD_STEP;
                        let gp = self.gauge_unchecked(&p, dot3(&p, &p).sqrt());
                        let gm = self.gauge_unchecked(&m, dot3(&m, &m).sqrt());
                        (gp - gm) / (2.0 * FD_STEP)
                    })
                    .collect()
            }
        }
    }

    /// Nodes whose second derivative spikes relative to the rest of the
    /// profile (n = 2); gauge gradients there are unreliable.
    pub fn corner_nodes(&self) -> Vec<usize> {
        let Interpolant::Spline(s) = &self.interp else {
            return Vec::new();
        };
        let mut abs: Vec<f64> = s.m.iter().map(|m| m.abs()).collect();
        abs.sort_by(|a, b| a.total_cmp(b));
        let median = abs[abs.len() / 2];
        let mean_rho = self.radial.iter().sum::<f64>() / self.radial.len() as f64;
        let limit = CORNER_FACTOR * (median + mean_rho);
        (0..s.m.len()).filter(|&i| s.m[i].abs() > limit).collect()
    }

    /// Largest distance between boundary samples ρᵢuᵢ.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<Vec<f64>> =
            self.quadrature.nodes().zip(&self.radial).map(|(u, r)| u.iter().map(|x| r * x).collect()).collect();
        let mut best = 0.0f64;
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                let d: f64 = pts[a].iter().zip(&pts[b]).map(|(x, y)| (x - y) * (x - y)).sum();
                best = best.max(d);
            }
        }
        best.sqrt()
    }

    /// h(u) = maxᵢ ρᵢ (u·uᵢ).
    pub fn support(&self, u: &[f64]) -> f64 {
        self.to_radial_body().support(u)
    }

    pub fn to_file(&self, label: Option<String>) -> BodyFile {
        BodyFile {
            schema: "v1".into(),
            dim: self.dim(),
            count: self.quadrature.len(),
            radial: self.radial.clone(),
            label,
        }
    }
}

/// JSON body corpus entry: quadrature size and radial samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyFile {
    pub schema: String,
    pub dim: usize,
    pub count: usize,
    pub radial: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl BodyFile {
    pub fn build(&self) -> Result<StarBody> {
        if self.schema != "v1" {
            return Err(Error::Format(format!("unknown body schema {}", self.schema)));
        }
        if self.radial.len() != self.count {
            return Err(Error::Format("radial sample count does not match".into()));
        }
        StarBody::new(make_quadrature(self.dim, self.count)?, self.radial.clone())
    }
}

/// The polar body: ρ_{K*} = 1/h_K with h_K taken from the radial samples.
pub fn polar(k: &StarBody) -> Result<StarBody> {
    let body = k.to_radial_body();
    let radial = k.quadrature.nodes().map(|u| 1.0 / body.support(u)).collect();
    StarBody::new(k.quadrature.clone(), radial)
}

/// The integrand of the projection-body root problem: gauge gradients at the
/// nodes of K and the cone-measure weights wᵢρᵢⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionIntegrand {
    dim: usize,
    gradients: Vec<Vec<f64>>,
    weights: Vec<f64>,
    total: f64,
}

impl ProjectionIntegrand {
    pub fn new(k: &StarBody) -> Self {
        let n = k.dim();
        let mut gradients = vec![Vec::with_capacity(k.quadrature.len()); n];
        for u in k.quadrature.nodes() {
            for (comp, g) in gradients.iter_mut().zip(k.gauge_gradient_unchecked(u, 1.0)) {
                comp.push(g);
            }
        }
        let weights: Vec<f64> =
            k.radial.iter().zip(k.quadrature.weights()).map(|(r, w)| w * r.powi(n as i32)).collect();
        let total = weights.iter().sum();
        Self { dim: n, gradients, weights, total }
    }

    /// Samples u·∇g_K(wᵢ).
    pub fn samples(&self, u: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.weights.len(), 0.0);
        for (comp, &uk) in self.gradients.iter().zip(u) {
            for (o, &g) in out.iter_mut().zip(comp) {
                *o += uk * g;
            }
        }
    }

    /// h_{Π_φK}(u) for any u; positively homogeneous of degree 1.
    pub fn solve(&self, u: &[f64], phi: &OrliczFunction, hint: Option<f64>) -> Result<NormOutcome> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: u.len() });
        }
        let mut buf = Vec::new();
        self.samples(u, &mut buf);
        luxemburg::solve_raw(&buf, &self.weights, self.total, phi, hint)
    }

    pub fn support(&self, u: &[f64], phi: &OrliczFunction) -> Result<f64> {
        Ok(self.solve(u, phi, None)?.value())
    }

    /// Σ wᵢρᵢⁿ (u·∇g)₊ = ∫_{∂K} (u·ν)₊ dH^{n−1}.
    pub fn positive_shadow(&self, u: &[f64]) -> f64 {
        let mut buf = Vec::new();
        self.samples(u, &mut buf);
        buf.iter().zip(&self.weights).map(|(s, w)| w * s.max(0.0)).sum()
    }
}

/// Support values of a body at quadrature nodes; +∞ marks flagged nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportBody {
    quadrature: SphericalQuadrature,
    support: Vec<f64>,
    flagged: Vec<usize>,
    roots: Vec<Option<LuxemburgRoot>>,
    integrand: ProjectionIntegrand,
    phi: OrliczFunction,
}

impl SupportBody {
    pub fn quadrature(&self) -> &SphericalQuadrature {
        &self.quadrature
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn flagged(&self) -> &[usize] {
        &self.flagged
    }

    pub fn roots(&self) -> impl Iterator<Item = &LuxemburgRoot> {
        self.roots.iter().flatten()
    }

    /// Support value in an arbitrary direction.
    pub fn support_at(&self, u: &[f64]) -> Result<f64> {
        self.integrand.support(u, &self.phi)
    }

    /// |Π*| = (1/n) Σ wᵢ hᵢ^{−n}.
    pub fn polar_volume(&self) -> f64 {
        let n = self.quadrature.dim() as i32;
        self.support.iter().zip(self.quadrature.weights()).map(|(h, w)| w * h.powi(-n)).sum::<f64>() / n as f64
    }

    /// The polar body as radial samples ρ* = 1/h.
    pub fn polar(&self) -> Result<RadialBody> {
        RadialBody::new(self.quadrature.clone(), self.support.iter().map(|h| 1.0 / h).collect())
    }

    /// Largest violation of h(u+v) ≤ h(u) + h(v) over `trials` random pairs
    /// of nodes, relative to h(u) + h(v).
    pub fn subadditivity_defect(&self, trials: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.quadrature.len();
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..trials {
            let (i, j) = (rng.gen_range(0..m), rng.gen_range(0..m));
            let (u, v) = (self.quadrature.node(i), self.quadrature.node(j));
            let w: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + b).collect();
            if w.iter().all(|x| x.abs() < 1e-12) {
                continue;
            }
            let huv = self.support_at(&w)?;
            let sum = self.support[i] + self.support[j];
            worst = worst.max((huv - sum) / sum);
        }
        Ok(worst)
    }
}

/// Π_φK evaluated at every node of K's quadrature.
pub fn orlicz_projection_body(k: &StarBody, phi: &OrliczFunction) -> Result<SupportBody> {
    let integrand = ProjectionIntegrand::new(k);
    let mut support = Vec::with_capacity(k.quadrature.len());
    let mut roots = Vec::with_capacity(k.quadrature.len());
    let mut flagged = Vec::new();
    let mut hint = None;
    let mut buf = Vec::new();
    for (i, u) in k.quadrature.nodes().enumerate() {
        integrand.samples(u, &mut buf);
        match luxemburg::solve_raw(&buf, &integrand.weights, integrand.total, phi, hint)? {
            NormOutcome::Root(r) => {
                hint = Some(r.lambda);
                support.push(r.lambda);
                roots.push(Some(r));
            }
            NormOutcome::Zero | NormOutcome::Unbounded => {
                flagged.push(i);
                support.push(f64::INFINITY);
                roots.push(None);
            }
        }
    }
    Ok(SupportBody { quadrature: k.quadrature.clone(), support, flagged, roots, integrand, phi: phi.clone() })
}

/// f(x) = max(0, 1 − g_K(x)).
pub fn cone_function(k: &StarBody, grid: Grid) -> Result<ScalarField> {
    if grid.dim() != k.dim() {
        return Err(Error::DimensionMismatch { expected: k.dim(), got: grid.dim() });
    }
    ScalarField::sample(grid, |x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            1.0
        } else {
            1.0 - k.gauge_unchecked(x, r)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeReport {
    /// ‖uᵢ‖ from the grid cone.
    pub grid_norms: Vec<f64>,
    /// h_{Π_φK}(−uᵢ) from the spherical integral.
    pub support_values: Vec<f64>,
    pub sup_relative_gap: f64,
}

/// Compares ‖u‖_{f,φ} for the cone f = 1 − g_K on `grid` with h_{Π_φK}(−u)
/// at every node of `q`.
pub fn bridge_check(k: &StarBody, phi: &OrliczFunction, q: &SphericalQuadrature, grid: Grid) -> Result<BridgeReport> {
    let f = cone_function(k, grid)?;
    let (grid_norms, _, _) = crate::affine_ball::directional_norms(&f, phi, q)?;
    let integrand = ProjectionIntegrand::new(k);
    let mut support_values = Vec::with_capacity(q.len());
    let mut hint = None;
    for u in q.nodes() {
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        let h = integrand.solve(&neg, phi, hint)?;
        let NormOutcome::Root(r) = h else {
            return Err(Error::DegenerateNorm("projection body support is not finite".into()));
        };
        hint = Some(r.lambda);
        support_values.push(r.lambda);
    }
    let sup_relative_gap = grid_norms.iter().zip(&support_values).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
    Ok(BridgeReport { grid_norms, support_values, sup_relative_gap })
}

/// |Π*_φK| / |K|.
pub fn petty_ratio(k: &StarBody, phi: &OrliczFunction) -> Result<f64> {
    let pb = orlicz_projection_body(k, phi)?;
    if !pb.flagged.is_empty() {
        return Err(Error::DegenerateNorm(format!("{} projection-body nodes flagged", pb.flagged.len())));
    }
    Ok(pb.polar_volume() / k.volume())
}

/// (∫_{∂K} (u·ν)₊ dH^{n−1}, |K| / D_K).
pub fn crude_projection_estimate(k: &StarBody, u: &[f64]) -> Result<(f64, f64)> {
    check_unit(u, k.dim())?;
    let lhs = ProjectionIntegrand::new(k).positive_shadow(u);
    Ok((lhs, k.volume() / k.diameter()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spline_interpolates_nodes_and_trig_polynomials() {
        let k = StarBody::from_fn(2, 128, |u| 1.0 + 0.3 * u[0] * u[1]).unwrap();
        for (i, r) in k.radial().iter().enumerate() {
            assert_abs_diff_eq!(k.radial_at_angle(k.quadrature().angle(i)), *r, epsilon = 1e-12);
        }
        for t in [0.1f64, 1.0, 2.5, 4.0, 6.2] {
            let exact = 1.0 + 0.15 * (2.0 * t).sin();
            assert_abs_diff_eq!(k.radial_at_angle(t), exact, epsilon = 1e-7);
            let Interpolant::Spline(s) = &k.interp else { unreachable!() };
            assert_abs_diff_eq!(s.derivative(t), 0.3 * (2.0 * t).cos(), epsilon = 1e-5);
        }
    }

    #[test]
    fn gauge_examples() {
        let disk = StarBody::ball(2, 512, 1.0).unwrap();
        assert_abs_diff_eq!(disk.gauge(&[2.0, 0.0]).unwrap(), 2.0, epsilon = 1e-12);
        let t: f64 = 0.77;
        assert_abs_diff_eq!(disk.gauge(&[t.cos(), t.sin()]).unwrap(), 1.0, epsilon = 1e-8);
        let e = StarBody::ellipse(2.0, 1.0, 512).unwrap();
        assert_abs_diff_eq!(e.gauge(&[2.0, 0.0]).unwrap(), 1.0, epsilon = 1e-12);
        assert!(e.gauge(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn gauge_gradient_examples() {
        let disk = StarBody::ball(2, 512, 1.0).unwrap();
        for t in [0.0f64, 0.4, 2.0, 5.5] {
            let u = [t.cos(), t.sin()];
            let g = disk.gauge_gradient(&u).unwrap();
            assert_abs_diff_eq!(g[0], u[0], epsilon = 1e-12);
            assert_abs_diff_eq!(g[1], u[1], epsilon = 1e-12);
        }
        let (a, b) = (1.7, 0.6);
        let e = StarBody::ellipse(a, b, 512).unwrap();
        let g = e.gauge_gradient(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(g[0], 1.0 / a, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-8);
        // analytic oracle away from the axes
        for t in [0.3f64, 1.2, 2.9] {
            let x = [t.cos(), t.sin()];
            let gx = ((x[0] / a).powi(2) + (x[1] / b).powi(2)).sqrt();
            let oracle = [x[0] / (a * a * gx), x[1] / (b * b * gx)];
            let g = e.gauge_gradient(&x).unwrap();
            assert_abs_diff_eq!(g[0], oracle[0], epsilon = 1e-5);
            assert_abs_diff_eq!(g[1], oracle[1], epsilon = 1e-5);
        }
    }

    #[test]
    fn euler_identity_and_homogeneity() {
        let k = StarBody::random_star(512, 0.3, 5).unwrap();
        for (i, u) in k.quadrature().nodes().enumerate() {
            let g = k.gauge_gradient(u).unwrap();
            let lhs = u[0] * g[0] + u[1] * g[1];
            assert_abs_diff_eq!(lhs, 1.0 / k.radial()[i], epsilon = 1e-6);
        }
        // finite differences of the gauge at 2u against the analytic gradient at u
        for t in [0.2f64, 1.9, 4.4] {
            let u = [t.cos(), t.sin()];
            let x = [2.0 * u[0], 2.0 * u[1]];
            let h = 1e-6;
            let fd: Vec<f64> = (0..2)
                .map(|c| {
                    let mut p = x;
                    let mut m = x;
                    p[c] += h;
                    m[c] -= h;
                    (k.gauge(&p).unwrap() - k.gauge(&m).unwrap()) / (2.0 * h)
                })
                .collect();
            let g = k.gauge_gradient(&u).unwrap();
            let g2 = k.gauge_gradient(&x).unwrap();
            assert_abs_diff_eq!(g[0], g2[0], epsilon = 1e-8);
            assert_abs_diff_eq!(g[1], g2[1], epsilon = 1e-8);
            assert_abs_diff_eq!(g[0], fd[0], epsilon = 1e-6);
            assert_abs_diff_eq!(g[1], fd[1], epsilon = 1e-6);
        }
    }

    #[test]
    fn polar_examples() {
        let disk = StarBody::ball(2, 512, 1.0).unwrap();
        let p = polar(&disk).unwrap();
        assert!(p.radial().iter().all(|r| (r - 1.0).abs() < 0.005));
        let big = StarBody::ball(2, 512, 2.5).unwrap();
        assert!(polar(&big).unwrap().radial().iter().all(|r| (r - 0.4).abs() < 0.4 * 0.005));
        let e = StarBody::ellipse(2.0, 1.0, 512).unwrap();
        let pe = polar(&e).unwrap();
        assert_abs_diff_eq!(pe.radial()[0], 0.5, epsilon = 1e-12);
        let back = polar(&pe).unwrap();
        for (a, b) in back.radial().iter().zip(e.radial()) {
            assert!((a - b).abs() / b < 0.01);
        }
    }

    #[test]
    fn corners_are_flagged() {
        let smooth = StarBody::ellipse(1.5, 1.0, 512).unwrap();
        assert!(smooth.corner_nodes().is_empty());
        // a square has kinks at its vertices
        let square = StarBody::from_fn(2, 512, |u| 1.0 / u[0].abs().max(u[1].abs())).unwrap();
        assert!(!square.corner_nodes().is_empty());
    }

    #[test]
    fn projection_body_of_the_disk() {
        let disk = StarBody::ball(2, 512, 1.0).unwrap();
        let pb = orlicz_projection_body(&disk, &OrliczFunction::power(2.0).unwrap()).unwrap();
        assert!(pb.flagged().is_empty());
        for h in pb.support() {
            assert!((h - 0.5f64.sqrt()).abs() / 0.5f64.sqrt() < 0.01);
        }
        assert!(pb.roots().all(|r| (r.modular - 1.0).abs() <= 1e-10));
        let pb15 = orlicz_projection_body(&disk, &OrliczFunction::power(1.5).unwrap()).unwrap();
        let (lo, hi) = pb15.support().iter().fold((f64::INFINITY, 0.0f64), |(a, b), h| (a.min(*h), b.max(*h)));
        assert!((hi - lo) / lo < 1e-9);
    }

    #[test]
    fn projection_body_is_subadditive() {
        let k = StarBody::random_star(256, 0.3, 9).unwrap();
        for phi in [OrliczFunction::power(2.0).unwrap(), OrliczFunction::asymmetric_power(2.0, 0.3).unwrap()] {
            let pb = orlicz_projection_body(&k, &phi).unwrap();
            assert!(pb.subadditivity_defect(200, 1).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn crude_estimate_on_the_disk() {
        let disk = StarBody::ball(2, 512, 1.0).unwrap();
        let (lhs, rhs) = crude_projection_estimate(&disk, &[0.0, 1.0]).unwrap();
        assert!((lhs - 2.0).abs() < 1e-3, "{lhs}");
        assert!((rhs - PI / 2.0).abs() < 1e-3, "{rhs}");
        let (l3, r3) = crude_projection_estimate(&disk.scaled(3.0).unwrap(), &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(l3 / r3, lhs / rhs, epsilon = 1e-9);
        let thin = StarBody::ellipse(3.0, 0.1, 512).unwrap();
        let (lt, rt) = crude_projection_estimate(&thin, &[1.0, 0.0]).unwrap();
        assert!(lt >= rt * 0.99);
    }

    #[test]
    fn cone_function_levels() {
        let e = StarBody::ellipse(0.8, 0.5, 512).unwrap();
        let f = cone_function(&e, Grid::cube(2, 1.0, 256).unwrap()).unwrap();
        assert!((f.max() - 1.0).abs() < 0.01);
        for h in [0.25, 0.5] {
            let expect = (1.0 - h) * (1.0 - h) * e.volume();
            assert!((f.superlevel_volume(h) - expect).abs() / expect < 0.02);
        }
    }

    #[test]
    fn body_file_round_trip() {
        let k = StarBody::random_star(64, 0.2, 1).unwrap();
        let file = k.to_file(Some("star".into()));
        let json = serde_json::to_string(&file).unwrap();
        let back: BodyFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.build().unwrap(), k);
    }

    #[test]
    fn three_dimensional_smoke() {
        let ball = StarBody::ball(3, 512, 1.0).unwrap();
        assert!((ball.volume() - 4.0 * PI / 3.0).abs() < 1e-9);
        let g = ball.gauge_gradient(&[0.0, 0.6, 0.8]).unwrap();
        assert_abs_diff_eq!(g[1], 0.6, epsilon = 1e-6);
        assert_abs_diff_eq!(g[2], 0.8, epsilon = 1e-6);
        let el = StarBody::ellipsoid([1.2, 1.0, 0.8], 1024).unwrap();
        let x = [0.3, -0.5, 0.81];
        let r = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let exact = ((x[0] / 1.2f64).powi(2) + (x[1] / 1.0f64).powi(2) + (x[2] / 0.8f64).powi(2)).sqrt();
        assert!((el.gauge(&x).unwrap() - exact).abs() / exact < 2e-3, "{r}");
        let pb = orlicz_projection_body(&ball, &OrliczFunction::power(2.0).unwrap()).unwrap();
        // (1/4π)∫ cos²θ dσ = 1/3
        for h in pb.support() {
            assert!((h - (1.0f64 / 3.0).sqrt()).abs() < 0.02);
        }
    }
}
