//! Field and body generators for the verification corpus.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affine_ball::{sl_transform, Matrix};
use crate::error::{Error, Result};
use crate::scalar_field::{read_field, Grid, ScalarField};
use crate::star_projection::{BodyFile, StarBody};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum RadialProfile {
    /// (1 − r²/R²)₊^k
    Bump { exponent: f64 },
    /// (1 − r/R)₊
    Cone,
    /// exp(1 − 1/(1 − r²/R²)) inside the ball
    Smooth,
    /// min(1, slope·(1 − r/R))₊
    TruncatedCone { slope: f64 },
}

impl RadialProfile {
    fn eval(&self, s: f64) -> f64 {
        // s = r/R
        if s >= 1.0 {
            return 0.0;
        }
        match self {
            RadialProfile::Bump { exponent } => (1.0 - s * s).powf(*exponent),
            RadialProfile::Cone => 1.0 - s,
            RadialProfile::Smooth => (1.0 - 1.0 / (1.0 - s * s)).exp(),
            RadialProfile::TruncatedCone { slope } => (slope * (1.0 - s)).min(1.0),
        }
    }
}

/// h·(1 − |M(x − c)|²)₊^k: an ellipsoidal bump with linear map M.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    #[serde(default = "one")]
    pub exponent: f64,
    #[serde(default = "one")]
    pub height: f64,
}

fn one() -> f64 {
    1.0
}

impl BumpSpec {
    /// Ellipse with semi-axes (a, b) rotated by `angle`, then sheared by
    /// x ↦ (x₀ + shear·x₁, x₁).
    pub fn ellipse(center: [f64; 2], a: f64, b: f64, angle: f64, shear: f64, exponent: f64, height: f64) -> Self {
        let (s, c) = angle.sin_cos();
        // M = diag(1/a, 1/b) · Rot(−angle) · Shear⁻¹
        let rot = [[c, s], [-s, c]];
        let shear_inv = [[1.0, -shear], [0.0, 1.0]];
        let mut m = vec![vec![0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let rs: f64 = (0..2).map(|k| rot[i][k] * shear_inv[k][j]).sum();
                m[i][j] = rs / if i == 0 { a } else { b };
            }
        }
        Self { center: center.to_vec(), matrix: m, exponent, height }
    }

    pub fn round(center: [f64; 2], radius: f64, exponent: f64, height: f64) -> Self {
        Self::ellipse(center, radius, radius, 0.0, 0.0, exponent, height)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut s2 = 0.0;
        for i in 0..n {
            let y: f64 = (0..n).map(|j| self.matrix[i][j] * (x[j] - self.center[j])).sum();
            s2 += y * y;
        }
        if s2 >= 1.0 {
            0.0
        } else {
            self.height * (1.0 - s2).powf(self.exponent)
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.center.len() != dim || self.matrix.len() != dim || self.matrix.iter().any(|r| r.len() != dim) {
            return Err(Error::Config("bump center/matrix do not match the corpus dimension".into()));
        }
        if !(self.exponent > 0.0 && self.height > 0.0) {
            return Err(Error::Config("bump exponent and height must be positive".into()));
        }
        Ok(())
    }
}

pub type Evaluator = Box<dyn Fn(&[f64]) -> f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldGenerator {
    Radial {
        #[serde(flatten)]
        profile: RadialProfile,
        radius: f64,
    },
    Bump(BumpSpec),
    SumOfBumps {
        bumps: Vec<BumpSpec>,
    },
    /// 1 − g_K(x/scale) with K a random star body.
    ConeOverStar {
        seed: u64,
        amplitude: f64,
        /// Largest radius of the scaled body.
        extent: f64,
    },
    /// A radial window times exp of a random trigonometric sum.
    SmoothedNoise {
        seed: u64,
        radius: f64,
        modes: usize,
        amplitude: f64,
    },
    File {
        path: PathBuf,
    },
}

impl FieldGenerator {
    pub fn check(&self, dim: usize) -> Result<()> {
        match self {
            FieldGenerator::Radial { radius, .. } | FieldGenerator::SmoothedNoise { radius, .. }
                if !(*radius > 0.0) =>
            {
                Err(Error::Config("radius must be positive".into()))
            }
            FieldGenerator::Bump(b) => b.check(dim),
            FieldGenerator::SumOfBumps { bumps } => {
                if bumps.is_empty() {
                    return Err(Error::Config("sum_of_bumps needs at least one bump".into()));
                }
                bumps.iter().try_for_each(|b| b.check(dim))
            }
            FieldGenerator::ConeOverStar { extent, .. } => {
                if dim != 2 {
                    return Err(Error::Config("cone_over_star is planar".into()));
                }
                if !(*extent > 0.0) {
                    return Err(Error::Config("extent must be positive".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Pointwise evaluator; `None` for file-backed fields.
    pub fn evaluator(&self, dim: usize) -> Result<Option<Evaluator>> {
        self.check(dim)?;
        let eval: Evaluator = match self.clone() {
            FieldGenerator::Radial { profile, radius } => Box::new(move |x| {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                profile.eval(r / radius)
            }),
            FieldGenerator::Bump(b) => Box::new(move |x| b.eval(x)),
            FieldGenerator::SumOfBumps { bumps } => Box::new(move |x| bumps.iter().map(|b| b.eval(x)).sum()),
            FieldGenerator::ConeOverStar { seed, amplitude, extent } => {
                let k = StarBody::random_star(512, amplitude, seed)?;
                let rmax = k.radial().iter().fold(0.0f64, |a, r| a.max(*r));
                let k = k.scaled(extent / rmax)?;
                Box::new(move |x| {
                    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if r == 0.0 {
                        1.0
                    } else {
                        (1.0 - r / k.radial_at(x)).max(0.0)
                    }
                })
            }
            FieldGenerator::SmoothedNoise { seed, radius, modes, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let waves: Vec<(Vec<f64>, f64, f64)> = (0..modes)
                    .map(|_| {
                        let freq: Vec<f64> = (0..dim).map(|_| rng.gen_range(-4.0..4.0)).collect();
                        (freq, rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..amplitude))
                    })
                    .collect();
                Box::new(move |x| {
                    let s2 = x.iter().map(|v| v * v).sum::<f64>() / (radius * radius);
                    if s2 >= 1.0 {
                        return 0.0;
                    }
                    let noise: f64 = waves
                        .iter()
                        .map(|(w, b, a)| a * (w.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + b).cos())
                        .sum();
                    (1.0 - s2).powi(2) * noise.exp()
                })
            }
            FieldGenerator::File { .. } => return Ok(None),
        };
        Ok(Some(eval))
    }

    /// Samples the generator on `grid`.
    pub fn generate(&self, grid: &Grid) -> Result<ScalarField> {
        match self.evaluator(grid.dim())? {
            Some(eval) => ScalarField::sample(grid.clone(), |x| eval(x)),
            None => {
                let FieldGenerator::File { path } = self else { unreachable!() };
                let f = read_field(path)?;
                if f.grid() != grid {
                    return Err(Error::Config(format!("{} was sampled on a different grid", path.display())));
                }
                Ok(f)
            }
        }
    }

    /// Samples x ↦ f(Ax) on `grid`, composing exactly when an evaluator exists.
    pub fn generate_composed(&self, grid: &Grid, a: &Matrix) -> Result<ScalarField> {
        match self.evaluator(grid.dim())? {
            Some(eval) => {
                let n = grid.dim();
                ScalarField::sample(grid.clone(), |x| eval(&a.apply(x)[..n]))
            }
            None => sl_transform(&self.generate(grid)?, a),
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            FieldGenerator::Radial { .. } => "radial",
            FieldGenerator::Bump(_) => "bump",
            FieldGenerator::SumOfBumps { .. } => "multi_bump",
            FieldGenerator::ConeOverStar { .. } => "star_cone",
            FieldGenerator::SmoothedNoise { .. } => "noise",
            FieldGenerator::File { .. } => "file",
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, FieldGenerator::Radial { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedField {
    pub name: String,
    #[serde(flatten)]
    pub generator: FieldGenerator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodyGenerator {
    Ball {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    RandomStar {
        seed: u64,
        amplitude: f64,
    },
    /// ρ(θ) = 1 + amplitude·cos(kθ): star-shaped, not convex for large amplitude.
    Flower {
        petals: u32,
        amplitude: f64,
    },
    File {
        path: PathBuf,
    },
}

impl BodyGenerator {
    pub fn generate(&self, nodes: usize) -> Result<StarBody> {
        match self {
            BodyGenerator::Ball { radius } => StarBody::ball(2, nodes, *radius),
            BodyGenerator::Ellipse { a, b } => StarBody::ellipse(*a, *b, nodes),
            BodyGenerator::RandomStar { seed, amplitude } => StarBody::random_star(nodes, *amplitude, *seed),
            BodyGenerator::Flower { petals, amplitude } => {
                StarBody::from_fn(2, nodes, |u| 1.0 + amplitude * (*petals as f64 * u[1].atan2(u[0])).cos())
            }
            BodyGenerator::File { path } => {
                let file: BodyFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                file.build()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBody {
    pub name: String,
    #[serde(flatten)]
    pub generator: BodyGenerator,
}

fn field(name: &str, generator: FieldGenerator) -> NamedField {
    NamedField { name: name.into(), generator }
}

/// Twenty planar fields on [−1, 1]², each supported in the disk of radius
/// 0.9: five radial controls, five ellipsoidal bumps under shears and
/// translations, five multi-bump fields, and five cones over random star
/// bodies.
pub fn default_fields() -> Vec<NamedField> {
    use FieldGenerator::*;
    let e = BumpSpec::ellipse;
    let r = BumpSpec::round;
    vec![
        field("radial_bump2", Radial { profile: RadialProfile::Bump { exponent: 2.0 }, radius: 0.8 }),
        field("radial_bump3", Radial { profile: RadialProfile::Bump { exponent: 3.0 }, radius: 0.85 }),
        field("radial_cone", Radial { profile: RadialProfile::Cone, radius: 0.8 }),
        field("radial_smooth", Radial { profile: RadialProfile::Smooth, radius: 0.75 }),
        field("radial_truncated_cone", Radial { profile: RadialProfile::TruncatedCone { slope: 2.0 }, radius: 0.85 }),
        field("bump_rotated", Bump(e([0.15, -0.1], 0.6, 0.35, 0.4, 0.0, 2.0, 1.0))),
        field("bump_sheared", Bump(e([-0.2, 0.1], 0.45, 0.35, 0.0, 0.8, 2.0, 1.0))),
        field("bump_thin", Bump(e([0.1, 0.2], 0.6, 0.25, -0.9, 0.0, 3.0, 1.0))),
        field("bump_sheared_down", Bump(e([-0.1, -0.15], 0.45, 0.4, 0.3, -0.6, 2.0, 1.0))),
        field("bump_soft_edge", Bump(e([0.2, 0.05], 0.55, 0.3, 1.2, 0.3, 1.5, 1.0))),
        field("two_bumps", SumOfBumps { bumps: vec![r([-0.35, 0.1], 0.3, 2.0, 1.0), r([0.4, -0.2], 0.25, 2.0, 0.7)] }),
        field(
            "three_bumps",
            SumOfBumps {
                bumps: vec![
                    r([-0.3, -0.3], 0.28, 2.0, 1.0),
                    r([0.35, -0.2], 0.3, 2.0, 0.8),
                    e([0.0, 0.4], 0.35, 0.2, 0.3, 0.0, 2.0, 0.6),
                ],
            },
        ),
        field(
            "overlapping_bumps",
            SumOfBumps { bumps: vec![r([-0.15, 0.0], 0.45, 2.0, 1.0), e([0.25, 0.1], 0.4, 0.25, 0.8, 0.0, 2.0, 0.9)] },
        ),
        field(
            "four_bumps",
            SumOfBumps {
                bumps: vec![
                    r([-0.4, 0.4], 0.22, 2.0, 1.0),
                    r([0.4, 0.4], 0.22, 2.0, 0.5),
                    r([-0.4, -0.4], 0.22, 3.0, 0.75),
                    r([0.4, -0.4], 0.22, 2.0, 0.3),
                ],
            },
        ),
        field(
            "bump_on_shoulder",
            SumOfBumps { bumps: vec![r([0.0, 0.0], 0.7, 2.0, 0.4), r([0.25, 0.2], 0.25, 2.0, 0.8)] },
        ),
        field("star_cone_1", ConeOverStar { seed: 1, amplitude: 0.3, extent: 0.85 }),
        field("star_cone_2", ConeOverStar { seed: 2, amplitude: 0.3, extent: 0.85 }),
        field("star_cone_3", ConeOverStar { seed: 3, amplitude: 0.4, extent: 0.85 }),
        field("star_cone_4", ConeOverStar { seed: 4, amplitude: 0.4, extent: 0.85 }),
        field("star_cone_5", ConeOverStar { seed: 5, amplitude: 0.5, extent: 0.85 }),
    ]
}

fn body(name: &str, generator: BodyGenerator) -> NamedBody {
    NamedBody { name: name.into(), generator }
}

/// The disk, two ellipses, a flower and eight random star bodies.
pub fn default_bodies() -> Vec<NamedBody> {
    use BodyGenerator::*;
    let mut out = vec![
        body("disk", Ball { radius: 1.0 }),
        body("ellipse_wide", Ellipse { a: 1.5, b: 0.8 }),
        body("star_a", RandomStar { seed: 11, amplitude: 0.3 }),
        body("ellipse_tall", Ellipse { a: 0.6, b: 1.2 }),
        body("flower", Flower { petals: 5, amplitude: 0.3 }),
        body("star_b", RandomStar { seed: 12, amplitude: 0.4 }),
    ];
    for seed in 13..19 {
        out.push(body(&format!("star_{seed}"), RandomStar { seed, amplitude: 0.35 }));
    }
    out
}
