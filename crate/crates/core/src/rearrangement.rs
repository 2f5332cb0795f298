//! Steiner symmetrization of fields and bodies, the symmetric decreasing
//! rearrangement, and iterated symmetrization along direction schedules.
//!
//! Along a grid axis, each line of samples is sorted and laid out
//! symmetrically about the midplane through the box center: the largest
//! value goes to the cell just past the midplane, the next to its mirror,
//! and so on outward. This keeps the multiset of samples, hence every
//! level-set cell count, exactly. Other directions rotate the field so that
//! the direction becomes an axis, symmetrize, and rotate back.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affine_ball::{resample, RadialBody};
use crate::error::{Error, Result};
use crate::scalar_field::{check_unit, ScalarField};
use crate::star_projection::StarBody;

/// Lines in the chord raster used to symmetrize planar bodies.
pub const BODY_RASTER_LINES: usize = 2048;
/// Rotated supports must stay this many cells inside the box.
const ROTATION_MARGIN: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    AxesCyclic,
    RandomUniform,
    FixedList,
}

/// A sequence of unit directions, used cyclically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSchedule {
    pub kind: ScheduleKind,
    pub seed: u64,
    pub directions: Vec<Vec<f64>>,
}

impl DirectionSchedule {
    /// e₀, e₁, …, e_{n−1}.
    pub fn axes_cyclic(dim: usize) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}")));
        }
        let directions = (0..dim)
            .map(|k| {
                let mut e = vec![0.0; dim];
                e[k] = 1.0;
                e
            })
            .collect();
        Ok(Self { kind: ScheduleKind::AxesCyclic, seed: 0, directions })
    }

    /// `count` directions drawn uniformly from the sphere.
    pub fn random_uniform(dim: usize, count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter("schedule needs at least one direction".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let directions = match dim {
            2 => (0..count)
                .map(|_| {
                    let t = rng.gen::<f64>() * 2.0 * PI;
                    vec![t.cos(), t.sin()]
                })
                .collect(),
            3 => (0..count)
                .map(|_| {
                    let z = 2.0 * rng.gen::<f64>() - 1.0;
                    let t = rng.gen::<f64>() * 2.0 * PI;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect(),
            _ => return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}"))),
        };
        Ok(Self { kind: ScheduleKind::RandomUniform, seed, directions })
    }

    pub fn fixed_list(directions: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = directions.first() else {
            return Err(Error::InvalidParameter("schedule needs at least one direction".into()));
        };
        let dim = first.len();
        for d in &directions {
            check_unit(d, dim)?;
        }
        Ok(Self { kind: ScheduleKind::FixedList, seed: 0, directions })
    }

    pub fn dim(&self) -> usize {
        self.directions[0].len()
    }

    pub fn direction(&self, step: usize) -> &[f64] {
        &self.directions[step % self.directions.len()]
    }
}

/// Slot order for the sorted values of a line of `n` cells.
fn placement_order(n: usize) -> Vec<usize> {
    let c = n / 2;
    (0..n)
        .map(|j| {
            if n.is_multiple_of(2) {
                if j % 2 == 0 {
                    c + j / 2
                } else {
                    c - 1 - j / 2
                }
            } else if j == 0 {
                c
            } else if j % 2 == 1 {
                c + j.div_ceil(2)
            } else {
                c - j / 2
            }
        })
        .collect()
}

fn axis_of(u: &[f64]) -> Option<usize> {
    let k = (0..u.len()).max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()))?;
    let off: f64 = (0..u.len()).filter(|&j| j != k).map(|j| u[j].abs()).sum();
    (off <= 1e-12).then_some(k)
}

/// Per-line symmetric decreasing rearrangement along grid axis `axis`.
pub fn steiner_axis(f: &ScalarField, axis: usize) -> Result<ScalarField> {
    let grid = f.grid();
    let dim = grid.dim();
    if axis >= dim {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
    }
    let n = grid.resolution()[axis];
    let stride = grid.strides()[axis];
    let order = placement_order(n);
    let src = f.values();
    let mut out = vec![0.0; src.len()];
    let mut line = Vec::with_capacity(n);
    for start in 0..src.len() {
        if grid.unravel(start)[axis] != 0 {
            continue;
        }
        line.clear();
        line.extend((0..n).map(|i| src[start + i * stride]).filter(|&v| v > 0.0));
        line.sort_by(|a, b| b.total_cmp(a));
        for (v, &slot) in line.iter().zip(&order) {
            out[start + slot * stride] = *v;
        }
    }
    ScalarField::new(grid.clone(), out)
}

/// An orthogonal map sending the symmetrization axis to u, as columns.
fn frame_for(u: &[f64]) -> ([[f64; 3]; 3], usize) {
    let dim = u.len();
    let mut r = [[0.0; 3]; 3];
    if dim == 2 {
        // R e₁ = u, R e₀ = (u_y, −u_x)
        r[0][0] = u[1];
        r[1][0] = -u[0];
        r[0][1] = u[0];
        r[1][1] = u[1];
        (r, 1)
    } else {
        // Householder reflection exchanging e₂ and u
        let w = [-u[0], -u[1], 1.0 - u[2]];
        let ww = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = if i == j { 1.0 } else { 0.0 } - if ww > 0.0 { 2.0 * w[i] * w[j] / ww } else { 0.0 };
            }
        }
        (r, 2)
    }
}

fn apply(r: &[[f64; 3]; 3], dim: usize, transpose: bool, x: &[f64], c: &[f64; 3]) -> [f64; 3] {
    let mut y = [0.0; 3];
    for i in 0..dim {
        let mut acc = 0.0;
        for j in 0..dim {
            let m = if transpose { r[j][i] } else { r[i][j] };
            acc += m * (x[j] - c[j]);
        }
        y[i] = c[i] + acc;
    }
    y
}

fn check_support_maps_inside<M: Fn(&[f64]) -> [f64; 3]>(f: &ScalarField, map: M, what: &str) -> Result<()> {
    let grid = f.grid();
    let dim = grid.dim();
    for (i, &v) in f.values().iter().enumerate() {
        if v > 0.0 {
            let x = grid.cell_center(i);
            let y = map(&x[..dim]);
            if !grid.contains_with_margin(&y[..dim], ROTATION_MARGIN) {
                return Err(Error::SupportOutsideBox { context: what.into() });
            }
        }
    }
    Ok(())
}

/// Steiner symmetrization of f about the hyperplane through the box center
/// orthogonal to u.
pub fn steiner(f: &ScalarField, u: &[f64]) -> Result<ScalarField> {
    let grid = f.grid();
    let dim = grid.dim();
    check_unit(u, dim)?;
    if let Some(axis) = axis_of(u) {
        return steiner_axis(f, axis);
    }
    let c = grid.box_center();
    let (r, axis) = frame_for(u);
    // rotated(y) = f(c + R(y − c)); a support point x sits at y = c + Rᵀ(x − c)
    check_support_maps_inside(f, |x| apply(&r, dim, true, x, &c), "rotation into the symmetrization frame")?;
    let rotated = resample(f, grid, |y| apply(&r, dim, false, y, &c));
    let sym = steiner_axis(&rotated, axis)?;
    check_support_maps_inside(&sym, |y| apply(&r, dim, false, y, &c), "rotation back from the symmetrization frame")?;
    Ok(resample(&sym, grid, |x| apply(&r, dim, true, x, &c)))
}

/// Symmetric decreasing rearrangement centered at the box center.
///
/// Cells outside the boundary band are ranked by distance to the center and
/// receive the sorted samples in that order; each set of cells at equal
/// distance then shares the mean of its values. The integral is preserved
/// exactly and the result is radially nonincreasing.
pub fn sdr(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let dim = grid.dim();
    let c = grid.box_center();
    let mut values: Vec<f64> = f.values().iter().copied().filter(|&v| v > 0.0).collect();
    values.sort_by(|a, b| b.total_cmp(a));

    let mut cells: Vec<(f64, usize)> = (0..grid.len())
        .filter(|&i| !grid.in_band(&grid.unravel(i)))
        .map(|i| {
            let x = grid.cell_center(i);
            let d2: f64 = (0..dim).map(|k| (x[k] - c[k]) * (x[k] - c[k])).sum();
            (d2, i)
        })
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut out = vec![0.0; grid.len()];
    let n = values.len();
    let mut start = 0;
    while start < n {
        let d0 = cells[start].0;
        let tol = 1e-12 * d0.max(grid.cell_volume().powf(2.0 / dim as f64));
        let mut end = start + 1;
        while end < cells.len() && cells[end].0 - d0 <= tol {
            end += 1;
        }
        let sum: f64 = values[start..end.min(n)].iter().sum();
        let mean = sum / (end - start) as f64;
        for &(_, idx) in &cells[start..end] {
            out[idx] = mean;
        }
        start = end;
    }
    ScalarField::new(grid.clone(), out).expect("rearranged values are nonnegative and avoid the band")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    #[serde(rename = "L1_distance")]
    pub l1_distance: f64,
    pub integral: f64,
    pub max: f64,
}

/// Applies `k` Steiner symmetrizations along the schedule, recording the L¹
/// distance to sdr(f) after every step.
pub fn approximate_sdr(
    f: &ScalarField,
    schedule: &DirectionSchedule,
    k: usize,
) -> Result<(ScalarField, Vec<TraceRow>)> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if schedule.dim() != f.grid().dim() {
        return Err(Error::DimensionMismatch { expected: f.grid().dim(), got: schedule.dim() });
    }
    let target = sdr(f);
    let mut current = f.clone();
    let mut trace = Vec::with_capacity(k);
    for step in 1..=k {
        current = steiner(&current, schedule.direction(step - 1))?;
        trace.push(TraceRow {
            step,
            l1_distance: current.l1_distance(&target)?,
            integral: current.integral(),
            max: current.max(),
        });
    }
    Ok((current, trace))
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,L1_distance,integral,max\n");
    for r in trace {
        let _ = writeln!(out, "{},{},{},{}", r.step, r.l1_distance, r.integral, r.max);
    }
    out
}

fn required_nodes(k: &StarBody) -> usize {
    let (lo, hi) = k.radial().iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    (8.0 * PI * hi / lo).ceil() as usize
}

/// Steiner symmetral of a star body about u^⊥, on the same quadrature.
pub fn steiner_body(k: &StarBody, u: &[f64]) -> Result<StarBody> {
    check_unit(u, k.dim())?;
    let required = required_nodes(k);
    if k.quadrature().len() < required {
        return Err(Error::UnderResolvedBody { have: k.quadrature().len(), required });
    }
    let radial = if k.dim() == 2 { steiner_body_2d(k, u) } else { steiner_body_3d(k, u) };
    StarBody::new(k.quadrature().clone(), radial)
}

/// Convenience wrapper for radial bodies such as affine balls.
pub fn steiner_radial_body(body: &RadialBody, u: &[f64]) -> Result<RadialBody> {
    Ok(steiner_body(&StarBody::from_radial_body(body)?, u)?.to_radial_body())
}

fn steiner_body_2d(k: &StarBody, u: &[f64]) -> Vec<f64> {
    // frame: s along u^⊥ = (u_y, −u_x), t along u
    let to_frame = |x: [f64; 2]| [x[0] * u[1] - x[1] * u[0], x[0] * u[0] + x[1] * u[1]];
    let m = 4 * k.quadrature().len();
    let poly: Vec<[f64; 2]> = (0..m)
        .map(|j| {
            let th = 2.0 * PI * j as f64 / m as f64;
            let r = k.radial_at_angle(th);
            to_frame([r * th.cos(), r * th.sin()])
        })
        .collect();
    let (smin, smax) = poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[0]), b.max(p[0])));
    let lines = BODY_RASTER_LINES;
    let ds = (smax - smin) / lines as f64;
    let mut crossings: Vec<Vec<f64>> = vec![Vec::new(); lines];
    for j in 0..m {
        let (p, q) = (poly[j], poly[(j + 1) % m]);
        if p[0] == q[0] {
            continue;
        }
        let (a, b) = if p[0] < q[0] { (p, q) } else { (q, p) };
        // lines with a.s ≤ s_l < b.s
        let first = ((a[0] - smin) / ds - 0.5).ceil().max(0.0) as usize;
        let mut l = first;
        while l < lines {
            let s = smin + (l as f64 + 0.5) * ds;
            if s >= b[0] {
                break;
            }
            if s >= a[0] {
                crossings[l].push(a[1] + (b[1] - a[1]) * (s - a[0]) / (b[0] - a[0]));
            }
            l += 1;
        }
    }
    let mut upper: Vec<[f64; 2]> = Vec::with_capacity(lines + 2);
    upper.push([smin, 0.0]);
    for (l, ts) in crossings.iter_mut().enumerate() {
        ts.sort_by(|a, b| a.total_cmp(b));
        let len: f64 = ts.chunks_exact(2).map(|c| c[1] - c[0]).sum();
        if len > 0.0 {
            upper.push([smin + (l as f64 + 0.5) * ds, 0.5 * len]);
        }
    }
    upper.push([smax, 0.0]);
    // closed symmetric polygon: upper chain then its mirror
    let mut sym: Vec<[f64; 2]> = upper.clone();
    sym.extend(upper.iter().rev().skip(1).take(upper.len() - 2).map(|p| [p[0], -p[1]]));

    k.quadrature()
        .nodes()
        .map(|w| {
            let d = to_frame([w[0], w[1]]);
            ray_polygon_max(&sym, d)
        })
        .collect()
}

/// Largest r with r·d on the polygon boundary.
fn ray_polygon_max(poly: &[[f64; 2]], d: [f64; 2]) -> f64 {
    let mut best = 0.0f64;
    let n = poly.len();
    for j in 0..n {
        let (p, q) = (poly[j], poly[(j + 1) % n]);
        let e = [q[0] - p[0], q[1] - p[1]];
        let den = d[0] * e[1] - d[1] * e[0];
        if den.abs() < 1e-300 {
            continue;
        }
        // r d = p + s e
        let r = (p[0] * e[1] - p[1] * e[0]) / den;
        let s = (p[0] * d[1] - p[1] * d[0]) / den;
        if (-1e-12..=1.0 + 1e-12).contains(&s) && r > best {
            best = r;
        }
    }
    best
}

fn steiner_body_3d(k: &StarBody, u: &[f64]) -> Vec<f64> {
    let rmax = k.radial().iter().fold(0.0f64, |a, r| a.max(*r));
    let inside = |x: [f64; 3]| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        r == 0.0 || r <= k.radial_at(&x)
    };
    let raster = 64;
    // length of {s : x' + s u ∈ K}
    let chord = |xp: [f64; 3]| -> f64 {
        let ds = 2.0 * rmax / raster as f64;
        let at = |s: f64| [xp[0] + s * u[0], xp[1] + s * u[1], xp[2] + s * u[2]];
        let refine = |mut a: f64, mut b: f64| {
            // a inside, b outside
            for _ in 0..30 {
                let mid = 0.5 * (a + b);
                if inside(at(mid)) {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        };
        let mut total = 0.0;
        let mut run_start: Option<f64> = None;
        let mut prev_s = -rmax - ds;
        for j in 0..=raster + 1 {
            let s = -rmax - ds + j as f64 * ds;
            let is_in = j > 0 && j <= raster && inside(at(s));
            match (run_start, is_in) {
                (None, true) => run_start = Some(refine(s, prev_s)),
                (Some(a), false) => {
                    total += refine(prev_s, s) - a;
                    run_start = None;
                }
                _ => {}
            }
            prev_s = s;
        }
        total
    };
    k.quadrature()
        .nodes()
        .map(|w| {
            let t = w[0] * u[0] + w[1] * u[1] + w[2] * u[2];
            let wp = [w[0] - t * u[0], w[1] - t * u[1], w[2] - t * u[2]];
            let contained = |r: f64| (r * t).abs() <= 0.5 * chord([r * wp[0], r * wp[1], r * wp[2]]);
            let steps = 48;
            let dr = 1.5 * rmax / steps as f64;
            let mut lo = 0.0;
            let mut hi = 1.5 * rmax;
            for j in 1..=steps {
                let r = j as f64 * dr;
                if contained(r) {
                    lo = r;
                } else {
                    hi = r;
                    break;
                }
            }
            for _ in 0..30 {
                let mid = 0.5 * (lo + hi);
                if contained(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Superlevel cell counts of f at `levels` evenly spaced levels in
/// (0, max f).
pub fn level_table(f: &ScalarField, levels: usize) -> Vec<usize> {
    let fmax = f.max();
    (1..=levels).map(|l| f.superlevel_count(fmax * l as f64 / (levels + 1) as f64)).collect()
}
