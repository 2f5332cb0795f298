//! Luxemburg-type norms: the root λ of the modular equation
//! (1/M) Σ wᵢ φ(gᵢ/λ) = 1.
//!
//! The modular is continuous and strictly decreasing in λ as soon as one
//! sample lies on a strictly monotone side of φ, so the root coincides with
//! the infimum in the definition of the norm. The solver brackets the root and
//! then runs an Illinois-modified regula falsi on (ln λ, ln modular), which is
//! exact in one step for power-type φ and falls back to plain bisection
//! whenever an interpolation step does not make progress. No derivative of φ
//! is used, so piecewise-linear tables are fine.

use crate::error::{Error, Result};
use crate::orlicz::OrliczFunction;
use crate::scalar_field::ScalarField;

/// Tolerance on |modular(λ) − 1| accepted as a root certificate.
pub const ROOT_TOL: f64 = 1e-10;
/// Iteration cap for the refinement phase.
pub const MAX_ITER: usize = 80;

/// Integrand samples with their measures and the normalizing mass.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSampleSet {
    samples: Vec<f64>,
    weights: Vec<f64>,
    total_mass: f64,
}

impl WeightedSampleSet {
    pub fn new(samples: Vec<f64>, weights: Vec<f64>, total_mass: f64) -> Result<Self> {
        if samples.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: samples.len(), got: weights.len() });
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter("non-finite sample".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("weights must be positive and finite".into()));
        }
        if !(total_mass > 0.0 && total_mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("total mass must be positive, got {total_mass}")));
        }
        Ok(Self { samples, weights, total_mass })
    }

    /// Equal weights; the total mass is their sum.
    pub fn uniform(samples: Vec<f64>, weight: f64) -> Result<Self> {
        let n = samples.len();
        let total = weight * n as f64;
        Self::new(samples, vec![weight; n], total)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * c).collect(),
            weights: self.weights.clone(),
            total_mass: self.total_mass,
        }
    }
}

/// (1/M) Σ wᵢ φ(gᵢ/λ).
pub fn modular(s: &WeightedSampleSet, phi: &OrliczFunction, lambda: f64) -> f64 {
    modular_raw(&s.samples, &s.weights, s.total_mass, phi, lambda)
}

#[inline]
fn modular_raw(samples: &[f64], weights: &[f64], mass: f64, phi: &OrliczFunction, lambda: f64) -> f64 {
    phi.weighted_sum(samples, weights, 1.0 / lambda) / mass
}

/// Result of a norm computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormOutcome {
    /// Every sample is zero.
    Zero,
    /// A certified root.
    Root(LuxemburgRoot),
    /// No sample ever reaches the strictly monotone side of φ, so the
    /// modular vanishes identically and the infimum is +∞.
    Unbounded,
}

impl NormOutcome {
    pub fn value(&self) -> f64 {
        match self {
            NormOutcome::Zero => 0.0,
            NormOutcome::Root(r) => r.lambda,
            NormOutcome::Unbounded => f64::INFINITY,
        }
    }

    pub fn root(&self) -> Option<&LuxemburgRoot> {
        match self {
            NormOutcome::Root(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuxemburgRoot {
    pub lambda: f64,
    /// modular(lambda), for certificate checks.
    pub modular: f64,
    /// Bracket before refinement: modular(lo) ≥ 1 ≥ modular(hi).
    pub bracket: (f64, f64),
    pub iterations: usize,
}

impl LuxemburgRoot {
    pub fn certified(&self) -> bool {
        (self.modular - 1.0).abs() <= ROOT_TOL
    }
}

/// The Luxemburg norm of the samples; 0 for all-zero samples, +∞ when φ
/// never sees them.
pub fn luxemburg_norm(s: &WeightedSampleSet, phi: &OrliczFunction) -> Result<f64> {
    Ok(solve(s, phi, None)?.value())
}

/// Full solve with an optional warm-start guess for λ.
pub fn solve(s: &WeightedSampleSet, phi: &OrliczFunction, hint: Option<f64>) -> Result<NormOutcome> {
    solve_raw(&s.samples, &s.weights, s.total_mass, phi, hint)
}

pub(crate) fn solve_raw(
    samples: &[f64],
    weights: &[f64],
    mass: f64,
    phi: &OrliczFunction,
    hint: Option<f64>,
) -> Result<NormOutcome> {
    let gmax = samples.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if gmax == 0.0 {
        return Ok(NormOutcome::Zero);
    }
    let m = |lambda: f64| modular_raw(samples, weights, mass, phi, lambda);

    // samples that φ never sees leave the modular at zero for every λ
    if m(gmax * 1e-12) == 0.0 {
        return Ok(NormOutcome::Unbounded);
    }

    let (mut lo, mut m_lo, mut hi, mut m_hi);
    match hint.filter(|h| h.is_finite() && *h > 0.0) {
        Some(h) => {
            lo = h / 1.05;
            hi = h * 1.05;
            m_lo = m(lo);
            m_hi = m(hi);
        }
        None => {
            // Φ(gᵢ/hi) ≤ 1 for every sample when hi = max|g| / c_φ
            hi = gmax / c_phi(phi);
            m_hi = m(hi);
            lo = hi * 0.5;
            m_lo = m(lo);
        }
    }
    let mut guard = 0;
    while m_hi > 1.0 {
        lo = hi;
        m_lo = m_hi;
        hi *= 2.0;
        m_hi = m(hi);
        guard += 1;
        if guard > 2000 {
            return Err(Error::Solver("failed to bracket the root from above".into()));
        }
    }
    while m_lo < 1.0 {
        hi = lo;
        m_hi = m_lo;
        lo *= 0.5;
        m_lo = m(lo);
        guard += 1;
        if guard > 4000 {
            return Err(Error::Solver("failed to bracket the root from below".into()));
        }
    }
    let bracket = (lo, hi);

    if (m_lo - 1.0).abs() <= ROOT_TOL {
        return Ok(NormOutcome::Root(LuxemburgRoot { lambda: lo, modular: m_lo, bracket, iterations: 0 }));
    }
    if (m_hi - 1.0).abs() <= ROOT_TOL {
        return Ok(NormOutcome::Root(LuxemburgRoot { lambda: hi, modular: m_hi, bracket, iterations: 0 }));
    }

    // F(x) = ln m(eˣ): decreasing, F(a) > 0 > F(b)
    let mut a = lo.ln();
    let mut b = hi.ln();
    let mut fa = m_lo.ln();
    let mut fb = m_hi.ln();
    let mut side = 0i8;
    let mut best = if (m_lo - 1.0).abs() < (m_hi - 1.0).abs() { (lo, m_lo) } else { (hi, m_hi) };
    let mut width = b - a;
    for it in 1..=MAX_ITER {
        let mut x =
            if fa.is_finite() && fb.is_finite() && fa != fb { b - fb * (b - a) / (fb - fa) } else { 0.5 * (a + b) };
        // force a bisection every third step unless the bracket keeps shrinking
        if !(x > a && x < b) || (it % 3 == 0 && (b - a) > 0.5 * width) {
            x = 0.5 * (a + b);
        }
        if it % 3 == 0 {
            width = b - a;
        }
        let lambda = x.exp();
        let mx = m(lambda);
        if (mx - 1.0).abs() < (best.1 - 1.0).abs() {
            best = (lambda, mx);
        }
        if (mx - 1.0).abs() <= ROOT_TOL {
            return Ok(NormOutcome::Root(LuxemburgRoot { lambda, modular: mx, bracket, iterations: it }));
        }
        let fx = mx.ln();
        if mx > 1.0 {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
            break;
        }
    }
    Ok(NormOutcome::Root(LuxemburgRoot { lambda: best.0, modular: best.1, bracket, iterations: MAX_ITER }))
}

/// c_φ = max{c > 0 : Φ(c) ≤ 1}, found by bisection on the increasing map
/// c ↦ Φ(c).
pub fn c_phi(phi: &OrliczFunction) -> f64 {
    let big = |c: f64| phi.big_phi(c);
    let mut hi = 1.0;
    if big(hi) == 1.0 {
        return hi;
    }
    let mut lo = 0.0;
    if big(hi) < 1.0 {
        while big(hi) < 1.0 {
            lo = hi;
            hi *= 2.0;
        }
        if big(hi) == 1.0 {
            return hi;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = big(mid);
        if v <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// ‖∇ᵥf‖_φ normalized by the support volume.
pub fn directional_norm(f: &ScalarField, v: &[f64], phi: &OrliczFunction) -> Result<f64> {
    Ok(directional_solve(f, v, phi)?.value())
}

/// As [`directional_norm`] but returning the full solver outcome.
pub fn directional_solve(f: &ScalarField, v: &[f64], phi: &OrliczFunction) -> Result<NormOutcome> {
    crate::scalar_field::check_unit(v, f.grid().dim())?;
    let sg = f.support_gradient();
    if sg.is_empty() {
        return Err(Error::DegenerateNorm("field has empty support".into()));
    }
    let mut buf = Vec::new();
    sg.directional_into(v, &mut buf);
    solve_raw(&buf, sg.weights(), sg.total_mass(), phi, None)
}

/// ‖ |∇f| ‖_Φ normalized by the support volume, with Φ the even majorant of φ.
pub fn gradient_norm(f: &ScalarField, phi: &OrliczFunction) -> Result<f64> {
    let sg = f.support_gradient();
    if sg.is_empty() {
        return Err(Error::DegenerateNorm("field has empty support".into()));
    }
    let big_phi = phi.even_majorant();
    let mags = sg.magnitudes();
    Ok(solve_raw(&mags, sg.weights(), sg.total_mass(), &big_phi, None)?.value())
}
