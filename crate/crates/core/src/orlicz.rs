//! Convex functions φ of the Orlicz class and their even majorant
//! Φ(t) = max{φ(t), φ(−t)}.
//!
//! A function of the class is convex, nonnegative, vanishes at the origin,
//! is strictly monotone on at least one half-line, and its even majorant grows
//! superlinearly. The built-in families satisfy this analytically; custom
//! piecewise-linear tables are admitted and can be certified with
//! [`validate`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Power,
    AsymmetricPower,
    Exponential,
    Custom,
}

/// Piecewise-linear function given by a breakpoint table, extended past the
/// first and last breakpoints with the slope of the adjacent segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "piecewise-linear table needs at least two matching breakpoints/values, got {}/{}",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().chain(values.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite entry in table".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("breakpoints must be strictly increasing".into()));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        let b = &self.breakpoints;
        let v = &self.values;
        let n = b.len();
        let seg = if t <= b[0] {
            0
        } else if t >= b[n - 1] {
            n - 2
        } else {
            // first breakpoint strictly greater than t, minus one
            b.partition_point(|&x| x <= t) - 1
        };
        let slope = (v[seg + 1] - v[seg]) / (b[seg + 1] - b[seg]);
        v[seg] + slope * (t - b[seg])
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// pos·(t)₊^p + neg·(t)₋^p
    Power {
        p: f64,
        pos: f64,
        neg: f64,
    },
    /// e^{|t|} − |t| − 1
    Exponential,
    Custom(PiecewiseLinear),
    /// max{k(t), k(−t)}
    EvenPart(Box<Kind>),
}

#[inline(always)]
fn abs_pow(a: f64, p: f64) -> f64 {
    if p == 2.0 {
        a * a
    } else if p == 3.0 {
        a * a * a
    } else if p == 1.5 {
        a * a.sqrt()
    } else if p == 4.0 {
        let s = a * a;
        s * s
    } else {
        a.powf(p)
    }
}

#[inline(always)]
fn exp_family(t: f64) -> f64 {
    let a = t.abs();
    if a < 1e-3 {
        let a2 = a * a;
        a2 * (0.5 + a * (1.0 / 6.0 + a * (1.0 / 24.0 + a / 120.0)))
    } else {
        a.exp_m1() - a
    }
}

impl Kind {
    #[inline]
    fn eval(&self, t: f64) -> f64 {
        match self {
            Kind::Power { p, pos, neg } => {
                if t > 0.0 {
                    if *pos == 0.0 {
                        0.0
                    } else {
                        pos * abs_pow(t, *p)
                    }
                } else if t < 0.0 {
                    if *neg == 0.0 {
                        0.0
                    } else {
                        neg * abs_pow(-t, *p)
                    }
                } else {
                    0.0
                }
            }
            Kind::Exponential => exp_family(t),
            Kind::Custom(table) => table.eval(t),
            Kind::EvenPart(inner) => inner.eval(t).max(inner.eval(-t)),
        }
    }

    fn even_part(&self) -> Kind {
        match self {
            Kind::Power { p, pos, neg } => {
                let m = pos.max(*neg);
                Kind::Power { p: *p, pos: m, neg: m }
            }
            Kind::Exponential => Kind::Exponential,
            Kind::EvenPart(inner) => Kind::EvenPart(inner.clone()),
            other => Kind::EvenPart(Box::new(other.clone())),
        }
    }
}

/// A convexity function φ together with its family tag and parameters.
///
/// Immutable after construction; evaluation is pure.
#[derive(Debug, Clone, PartialEq)]
pub struct OrliczFunction {
    kind: Kind,
    tag: FamilyTag,
    params: Vec<f64>,
    even: bool,
}

impl OrliczFunction {
    /// φ(t) = |t|^p.
    pub fn power(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Self { kind: Kind::Power { p, pos: 1.0, neg: 1.0 }, tag: FamilyTag::Power, params: vec![p], even: true })
    }

    /// φ(t) = (1−λ)(t)₊^p + λ(t)₋^p.
    pub fn asymmetric_power(p: f64, lambda: f64) -> Result<Self> {
        check_exponent(p)?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!("asymmetry weight must lie in [0, 1], got {lambda}")));
        }
        Ok(Self {
            kind: Kind::Power { p, pos: 1.0 - lambda, neg: lambda },
            tag: FamilyTag::AsymmetricPower,
            params: vec![p, lambda],
            even: lambda == 0.5,
        })
    }

    /// φ(t) = e^{|t|} − |t| − 1.
    pub fn exponential() -> Self {
        Self { kind: Kind::Exponential, tag: FamilyTag::Exponential, params: vec![], even: true }
    }

    /// Piecewise-linear φ from a breakpoint table. The table must interpolate
    /// to exactly zero at t = 0; the remaining class conditions are checked by
    /// [`validate`], not here.
    pub fn custom(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let table = PiecewiseLinear::new(breakpoints, values)?;
        let at_zero = table.eval(0.0);
        if at_zero != 0.0 {
            return Err(Error::InvalidParameter(format!("custom table must vanish at the origin, got {at_zero}")));
        }
        let even = {
            let probe = table.breakpoints().iter().map(|b| b.abs()).fold(1.0, f64::max);
            (0..=64).all(|k| {
                let t = probe * k as f64 / 32.0;
                (table.eval(t) - table.eval(-t)).abs() <= 1e-14 * (1.0 + table.eval(t).abs())
            })
        };
        Ok(Self { kind: Kind::Custom(table), tag: FamilyTag::Custom, params: vec![], even })
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.kind.eval(t)
    }

    /// Φ(t) = max{φ(t), φ(−t)}. Symmetric in t.
    #[inline]
    pub fn big_phi(&self, t: f64) -> f64 {
        if self.even {
            self.kind.eval(t.abs())
        } else {
            self.kind.eval(t).max(self.kind.eval(-t))
        }
    }

    /// Φ as an `OrliczFunction` in its own right (always even).
    pub fn even_majorant(&self) -> OrliczFunction {
        OrliczFunction { kind: self.kind.even_part(), tag: self.tag, params: self.params.clone(), even: true }
    }

    pub fn family(&self) -> FamilyTag {
        self.tag
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn is_even(&self) -> bool {
        self.even
    }

    /// Short human-readable label, e.g. `asymmetric_power(p=2, lambda=0.3)`.
    pub fn label(&self) -> String {
        match self.tag {
            FamilyTag::Power => format!("power(p={})", self.params[0]),
            FamilyTag::AsymmetricPower => {
                format!("asymmetric_power(p={}, lambda={})", self.params[0], self.params[1])
            }
            FamilyTag::Exponential => "exponential".to_string(),
            FamilyTag::Custom => "custom".to_string(),
        }
    }

    /// Σ wᵢ φ(scale·gᵢ). The family dispatch happens once, outside the loop.
    pub fn weighted_sum(&self, samples: &[f64], weights: &[f64], scale: f64) -> f64 {
        debug_assert_eq!(samples.len(), weights.len());
        match &self.kind {
            Kind::Power { p, pos, neg } => {
                let (p, pos, neg) = (*p, *pos, *neg);
                let mut acc_pos = 0.0;
                let mut acc_neg = 0.0;
                for (&g, &w) in samples.iter().zip(weights) {
                    let t = g * scale;
                    if t > 0.0 {
                        acc_pos += w * abs_pow(t, p);
                    } else {
                        acc_neg += w * abs_pow(-t, p);
                    }
                }
                // a zero coefficient must not turn an infinite partial sum into NaN
                let a = if pos == 0.0 { 0.0 } else { pos * acc_pos };
                let b = if neg == 0.0 { 0.0 } else { neg * acc_neg };
                a + b
            }
            Kind::Exponential => samples.iter().zip(weights).map(|(&g, &w)| w * exp_family(g * scale)).sum(),
            kind => samples.iter().zip(weights).map(|(&g, &w)| w * kind.eval(g * scale)).sum(),
        }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidParameter(format!("exponent must be finite and > 1 (superlinear growth), got {p}")));
    }
    Ok(())
}

/// Serializable description of φ, as used in configuration files, e.g.
/// `{"family":"asymmetric_power","p":2.0,"lambda":0.3}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OrliczSpec {
    Power { p: f64 },
    AsymmetricPower { p: f64, lambda: f64 },
    Exponential,
    Custom { breakpoints: Vec<f64>, values: Vec<f64> },
}

impl OrliczSpec {
    pub fn build(&self) -> Result<OrliczFunction> {
        match self {
            OrliczSpec::Power { p } => OrliczFunction::power(*p),
            OrliczSpec::AsymmetricPower { p, lambda } => OrliczFunction::asymmetric_power(*p, *lambda),
            OrliczSpec::Exponential => Ok(OrliczFunction::exponential()),
            OrliczSpec::Custom { breakpoints, values } => OrliczFunction::custom(breakpoints.clone(), values.clone()),
        }
    }
}

impl From<&OrliczFunction> for OrliczSpec {
    fn from(phi: &OrliczFunction) -> Self {
        match (&phi.kind, phi.tag) {
            (_, FamilyTag::Power) => OrliczSpec::Power { p: phi.params[0] },
            (_, FamilyTag::AsymmetricPower) => OrliczSpec::AsymmetricPower { p: phi.params[0], lambda: phi.params[1] },
            (_, FamilyTag::Exponential) => OrliczSpec::Exponential,
            (Kind::Custom(t), _) => OrliczSpec::Custom { breakpoints: t.breakpoints.clone(), values: t.values.clone() },
            // even majorant of a custom table: tabulate it on the original breakpoints
            (kind, FamilyTag::Custom) => {
                let mut bps: Vec<f64> = Vec::new();
                collect_breakpoints(kind, &mut bps);
                let mut all: Vec<f64> = bps.iter().flat_map(|&b| [b, -b]).collect();
                all.push(0.0);
                all.sort_by(|a, b| a.total_cmp(b));
                all.dedup();
                let values = all.iter().map(|&t| kind.eval(t)).collect();
                OrliczSpec::Custom { breakpoints: all, values }
            }
        }
    }
}

fn collect_breakpoints(kind: &Kind, out: &mut Vec<f64>) {
    match kind {
        Kind::Custom(t) => out.extend_from_slice(&t.breakpoints),
        Kind::EvenPart(inner) => collect_breakpoints(inner, out),
        _ => {}
    }
}

/// Outcome of one sampled class condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    /// The condition fails but is not required (one strict-monotonicity
    /// branch suffices).
    pub vacuous: bool,
    /// Sample point(s) exhibiting the failure, if any.
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<InvariantCheck>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const SAMPLE_TOL: f64 = 1e-12;

/// Certifies the class conditions by sampling on a uniform lattice of
/// `grid_count` points in [−T, T].
pub fn validate(phi: &OrliczFunction, t_max: f64, grid_count: usize) -> Result<ValidationReport> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("T must be positive, got {t_max}")));
    }
    if grid_count < 64 {
        return Err(Error::InvalidParameter(format!("grid_count must be ≥ 64, got {grid_count}")));
    }
    let lattice: Vec<f64> =
        (0..grid_count).map(|k| -t_max + 2.0 * t_max * k as f64 / (grid_count - 1) as f64).collect();
    let values: Vec<f64> = lattice.iter().map(|&t| phi.eval(t)).collect();

    let mut checks = Vec::new();

    let at_zero = phi.eval(0.0);
    checks.push(InvariantCheck {
        name: "vanishes_at_origin",
        passed: at_zero == 0.0,
        vacuous: false,
        witness: if at_zero == 0.0 { vec![] } else { vec![0.0, at_zero] },
    });

    let mut convex_witness = vec![];
    'outer: for i in 0..grid_count {
        for j in (i + 1)..grid_count {
            let mid = 0.5 * (lattice[i] + lattice[j]);
            let lhs = phi.eval(mid);
            let rhs = 0.5 * (values[i] + values[j]);
            // overflowed samples (exponential family) bound nothing
            if rhs.is_infinite() {
                continue;
            }
            if lhs > rhs + SAMPLE_TOL * rhs.abs().max(1.0) {
                convex_witness = vec![lattice[i], lattice[j]];
                break 'outer;
            }
        }
    }
    checks.push(InvariantCheck {
        name: "midpoint_convexity",
        passed: convex_witness.is_empty(),
        vacuous: false,
        witness: convex_witness,
    });

    let half: Vec<f64> = (0..=grid_count / 2).map(|k| t_max * k as f64 / (grid_count / 2) as f64).collect();
    let strict = |ts: &mut dyn Iterator<Item = f64>| -> Vec<f64> {
        let mut prev: Option<(f64, f64)> = None;
        for t in ts {
            let v = phi.eval(t);
            if let Some((pt, pv)) = prev {
                if v.is_infinite() && pv.is_infinite() {
                    return vec![];
                }
                if !(v > pv) {
                    return vec![pt, t];
                }
            }
            prev = Some((t, v));
        }
        vec![]
    };
    let inc_witness = strict(&mut half.iter().copied());
    let dec_witness = strict(&mut half.iter().map(|&t| -t));
    let inc = inc_witness.is_empty();
    let dec = dec_witness.is_empty();
    checks.push(InvariantCheck {
        name: "strictly_increasing_on_nonnegative",
        passed: inc,
        vacuous: !inc && dec,
        witness: inc_witness,
    });
    checks.push(InvariantCheck {
        name: "strictly_decreasing_on_nonpositive",
        passed: dec,
        vacuous: !dec && inc,
        witness: dec_witness,
    });

    let probes = [10.0, 1e2, 1e3, 1e4];
    let ratios: Vec<f64> = probes.iter().map(|&t| phi.big_phi(t) / t).collect();
    let mut super_witness = vec![];
    for k in 1..ratios.len() {
        // once the ratio overflows it stays unbounded
        if ratios[k - 1].is_infinite() {
            break;
        }
        if !(ratios[k] > ratios[k - 1]) {
            super_witness = vec![probes[k - 1], probes[k]];
            break;
        }
    }
    checks.push(InvariantCheck {
        name: "superlinear_growth",
        passed: super_witness.is_empty(),
        vacuous: false,
        witness: super_witness,
    });

    let passed = checks[0].passed && checks[1].passed && (inc || dec) && checks[4].passed;
    Ok(ValidationReport { checks, passed })
}

/// Checks Σbᵢ·φ(Σaᵢ/Σbᵢ) ≤ Σ bᵢ φ(aᵢ/bᵢ) for positive weights bᵢ.
pub fn convexity_split_check(phi: &OrliczFunction, a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidParameter("a and b must be nonempty and equally long".into()));
    }
    if b.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidParameter("all b_i must be positive".into()));
    }
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let lhs = sb * phi.eval(sa / sb);
    let rhs: f64 = a.iter().zip(b).map(|(&ai, &bi)| bi * phi.eval(ai / bi)).sum();
    Ok(lhs <= rhs + 1e-10 * rhs.abs().max(1.0))
}

/// Ψ(t) = φ(at − b) + φ(−at − b), nondecreasing in t > 0 for a ≠ 0.
pub fn psi(phi: &OrliczFunction, a: f64, b: f64, t: f64) -> f64 {
    phi.eval(a * t - b) + phi.eval(-a * t - b)
}
