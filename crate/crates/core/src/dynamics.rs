//! Trajectory windows, shifts and attractor dimension estimates.

use std::collections::HashSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::friction::{j_delta, FrictionModel, WallTrace};
use crate::geometry::MappedGrid;
use crate::solver::{State, Stiffness};

const REL_TIME_TOL: f64 = 1e-9;

/// Uniformly sampled run history that segments are cut from.
#[derive(Debug, Clone)]
pub struct StoredRun {
    pub dt_sample: f64,
    pub states: Vec<State>,
}

impl StoredRun {
    /// Wrap snapshots whose times are uniformly spaced.
    pub fn new(states: Vec<State>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::Analysis("a stored run needs at least two snapshots".into()));
        }
        let dt_sample = states[1].t - states[0].t;
        if !(dt_sample > 0.0) {
            return Err(Error::Analysis("snapshot times must increase".into()));
        }
        for (n, s) in states.iter().enumerate() {
            let expect = states[0].t + n as f64 * dt_sample;
            if (s.t - expect).abs() > REL_TIME_TOL * expect.abs().max(dt_sample) * 10.0 {
                return Err(Error::Analysis(format!(
                    "snapshot {n} at t = {} breaks uniform spacing {dt_sample}",
                    s.t
                )));
            }
        }
        Ok(Self { dt_sample, states })
    }

    pub fn t_start(&self) -> f64 {
        self.states[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.states[self.states.len() - 1].t
    }

    fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t_start()) / self.dt_sample;
        let n = x.round();
        if (x - n).abs() > 1e-6 || n < 0.0 {
            return None;
        }
        Some(n as usize)
    }

    /// The window `[t0, t0 + l]`.
    pub fn segment(&self, t0: f64, l: f64) -> Result<TrajectorySegment> {
        let count = samples_in(l, self.dt_sample)?;
        let first = self.index_of(t0).ok_or_else(|| {
            Error::Analysis(format!("t0 = {t0} is not on the stored sampling grid"))
        })?;
        if first + count > self.states.len() {
            return Err(Error::Analysis(format!(
                "continuation not stored: window [{t0}, {}] exceeds stored run ending at {}",
                t0 + l,
                self.t_end()
            )));
        }
        Ok(TrajectorySegment {
            l,
            dt_sample: self.dt_sample,
            t0,
            states: self.states[first..first + count].to_vec(),
        })
    }

    /// Consecutive windows of length `l` starting every `stride`, all with `t0 ≥ t_burn`.
    pub fn windows(&self, l: f64, stride: f64, t_burn: f64) -> Result<Vec<TrajectorySegment>> {
        let step = samples_in(stride, self.dt_sample)? - 1;
        if step == 0 {
            return Err(Error::Parameter {
                name: "stride",
                reason: "must be positive".into(),
            });
        }
        let first = ((t_burn - self.t_start()) / self.dt_sample).ceil().max(0.0) as usize;
        let mut out = Vec::new();
        let mut n = first;
        while n < self.states.len() {
            match self.segment(self.states[n].t, l) {
                Ok(s) => out.push(s),
                Err(_) => break,
            }
            n += step;
        }
        Ok(out)
    }
}

fn samples_in(l: f64, dt_sample: f64) -> Result<usize> {
    if !(l > 0.0 && dt_sample > 0.0) {
        return Err(Error::Parameter {
            name: "l",
            reason: format!("window {l} and cadence {dt_sample} must be positive"),
        });
    }
    let r = l / dt_sample;
    if (r - r.round()).abs() > REL_TIME_TOL * r.max(1.0) {
        return Err(Error::Parameter {
            name: "dt_sample",
            reason: format!("{dt_sample} does not divide l = {l}"),
        });
    }
    Ok(r.round() as usize + 1)
}

/// A window of an l-trajectory sampled at `dt_sample`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySegment {
    pub l: f64,
    pub dt_sample: f64,
    pub t0: f64,
    pub states: Vec<State>,
}

impl TrajectorySegment {
    pub fn new(l: f64, dt_sample: f64, t0: f64, states: Vec<State>, grid: &MappedGrid) -> Result<Self> {
        let count = samples_in(l, dt_sample)?;
        if states.len() != count {
            return Err(Error::Shape {
                expected: count,
                got: states.len(),
            });
        }
        for s in &states {
            s.check_shape(grid)?;
            if s.boundary_violation(grid) > 0.0 {
                return Err(Error::Analysis(format!("snapshot at t = {} violates wall conditions", s.t)));
            }
        }
        Ok(Self {
            l,
            dt_sample,
            t0,
            states,
        })
    }

    fn weights(&self) -> Vec<f64> {
        let n = self.states.len();
        (0..n)
            .map(|k| if k == 0 || k + 1 == n { 0.5 } else { 1.0 } * self.dt_sample)
            .collect()
    }
}

fn h_diff_sq(grid: &MappedGrid, a: &State, b: &State) -> f64 {
    let mut s = 0.0;
    for m in 0..a.v1.len() {
        let d1 = a.v1[m] - b.v1[m];
        let d2 = a.v2[m] - b.v2[m];
        s += grid.weights[m] * (d1 * d1 + d2 * d2);
    }
    s
}

fn h_dot(grid: &MappedGrid, a: &State, b: &State) -> f64 {
    grid.dot_w(&a.v1, &b.v1) + grid.dot_w(&a.v2, &b.v2)
}

fn check_compatible(a: &TrajectorySegment, b: &TrajectorySegment) -> Result<()> {
    let same = (a.l - b.l).abs() <= REL_TIME_TOL * a.l
        && (a.dt_sample - b.dt_sample).abs() <= REL_TIME_TOL * a.dt_sample
        && a.states.len() == b.states.len()
        && a.states.first().map(|s| s.v1.len()) == b.states.first().map(|s| s.v1.len());
    if same {
        Ok(())
    } else {
        Err(Error::Analysis("segments differ in window length, sampling or grid".into()))
    }
}

/// `(∫₀^l |a(s) − b(s)|² ds)^½` by the trapezoid rule.
pub fn xl_distance(a: &TrajectorySegment, b: &TrajectorySegment, grid: &MappedGrid) -> Result<f64> {
    check_compatible(a, b)?;
    let w = a.weights();
    let s: f64 = a
        .states
        .iter()
        .zip(&b.states)
        .zip(&w)
        .map(|((x, y), w)| w * h_diff_sq(grid, x, y))
        .sum();
    Ok(s.sqrt())
}

/// `L_t χ`, re-windowed from the stored run.
pub fn shift_segment(chi: &TrajectorySegment, t: f64, source: &StoredRun) -> Result<TrajectorySegment> {
    if (chi.dt_sample - source.dt_sample).abs() > REL_TIME_TOL * chi.dt_sample {
        return Err(Error::Analysis("segment and stored run use different cadences".into()));
    }
    source.segment(chi.t0 + t, chi.l)
}

pub fn endpoint(chi: &TrajectorySegment) -> &State {
    &chi.states[chi.states.len() - 1]
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderFit {
    pub c: f64,
    /// Exponent clamped to `(0, 1]`.
    pub beta: f64,
    pub beta_raw: f64,
    pub r2: f64,
    /// All distances vanished; `beta` is reported as 1.
    pub degenerate: bool,
    /// `(|t1 − t2|, ‖L_{t1}χ − L_{t2}χ‖)` pairs used in the fit.
    pub pairs: Vec<(f64, f64)>,
}

/// Least-squares line `y = a + b x`, returning `(a, b, r2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let r2 = if syy > 0.0 && sxx > 0.0 {
        (sxy * sxy) / (sxx * syy)
    } else {
        1.0
    };
    (a, b, r2)
}

/// Fit `‖L_{t1}χ − L_{t2}χ‖_{X_l} ≈ c |t1 − t2|^β` over all pairs of the given shifts.
pub fn holder_fit(
    chi: &TrajectorySegment,
    shifts: &[f64],
    source: &StoredRun,
    grid: &MappedGrid,
) -> Result<HolderFit> {
    let mut shifted = Vec::new();
    for &t in shifts {
        if let Ok(s) = shift_segment(chi, t, source) {
            shifted.push((t, s));
        }
    }
    let mut pairs = Vec::new();
    for a in 0..shifted.len() {
        for b in a + 1..shifted.len() {
            let gap = (shifted[a].0 - shifted[b].0).abs();
            if gap > 0.0 {
                pairs.push((gap, xl_distance(&shifted[a].1, &shifted[b].1, grid)?));
            }
        }
    }
    if pairs.len() < 5 {
        return Err(Error::Analysis(format!(
            "Hölder fit needs at least 5 usable shift pairs, got {}",
            pairs.len()
        )));
    }
    let scale = chi
        .states
        .iter()
        .map(|s| h_dot(grid, s, s))
        .fold(0.0, f64::max)
        .sqrt()
        * chi.l.sqrt();
    let dmax = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    if dmax <= 1e-12 * scale.max(1e-300) || pairs.iter().any(|p| p.1 <= 0.0) {
        return Ok(HolderFit {
            c: dmax,
            beta: 1.0,
            beta_raw: f64::NAN,
            r2: 1.0,
            degenerate: true,
            pairs,
        });
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let (a, b, r2) = linear_fit(&x, &y);
    Ok(HolderFit {
        c: a.exp(),
        beta: b.clamp(f64::MIN_POSITIVE, 1.0),
        beta_raw: b,
        r2,
        degenerate: false,
        pairs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularitySeries {
    pub t: Vec<f64>,
    /// `t²|v_t|² + tν‖v‖² + 2t j_δ(v)`.
    pub y: Vec<f64>,
    pub eta: f64,
    /// Running maximum of `y` over `[η, t]`; `NaN` before `η`.
    pub running_max: Vec<f64>,
    pub max_on_window: f64,
}

/// The time-regularity functional along a stored run, `v_t` by backward differences.
pub fn time_regularity_monitor(
    run: &StoredRun,
    dt: f64,
    fm: &FrictionModel,
    nu: f64,
    grid: &MappedGrid,
    eta: f64,
) -> Result<RegularitySeries> {
    if run.dt_sample > 10.0 * dt * (1.0 + REL_TIME_TOL) {
        return Err(Error::Analysis(format!(
            "snapshot cadence {} exceeds 10·dt = {}",
            run.dt_sample,
            10.0 * dt
        )));
    }
    if !(eta > 0.0) {
        return Err(Error::Parameter {
            name: "eta",
            reason: format!("must be positive, got {eta}"),
        });
    }
    let k = Stiffness::new(grid);
    let mut t = Vec::new();
    let mut y = Vec::new();
    for w in run.states.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let vt_sq = h_diff_sq(grid, cur, prev) / (run.dt_sample * run.dt_sample);
        let v_sq = k.form(&cur.v1, &cur.v1) + k.form(&cur.v2, &cur.v2);
        let j = j_delta(fm, &WallTrace::new(grid.bottom_row(&cur.v1)), grid)?;
        let s = cur.t;
        t.push(s);
        y.push(s * s * vt_sq + s * nu * v_sq + 2.0 * s * j);
    }
    let mut running_max = Vec::with_capacity(y.len());
    let mut m = f64::NAN;
    for (s, v) in t.iter().zip(&y) {
        if *s >= eta - 1e-12 {
            m = if m.is_nan() { *v } else { m.max(*v) };
        }
        running_max.push(m);
    }
    if m.is_nan() {
        return Err(Error::Analysis(format!("stored run ends before eta = {eta}")));
    }
    Ok(RegularitySeries {
        t,
        y,
        eta,
        running_max,
        max_on_window: m,
    })
}

/// One `(τ, t)` check of the difference bound between two runs.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionEntry {
    pub tau: f64,
    pub t: f64,
    pub diff_sq: f64,
    pub diff_sq_tau: f64,
    /// `∫_τ^t ‖w‖² ds`.
    pub integral_w: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionLedger {
    pub c_lady: f64,
    pub nu: f64,
    pub entries: Vec<ContractionEntry>,
    pub all_hold: bool,
    /// Observed `|e(χ1) − e(χ2)|·√l / xl_distance` for the full window.
    pub lipschitz_observed: f64,
    /// `exp(½ ∫₀^l (2/ν) c⁴ ‖w‖² ds)`.
    pub lipschitz_bound: f64,
}

/// Check `|w(t) − v(t)|² ≤ |w(τ) − v(τ)|² exp(∫_τ^t (2/ν) c⁴ ‖w‖²)` at every snapshot pair.
pub fn contraction_ledger(
    v: &TrajectorySegment,
    w: &TrajectorySegment,
    c_lady: f64,
    nu: f64,
    grid: &MappedGrid,
) -> Result<ContractionLedger> {
    check_compatible(v, w)?;
    let k = Stiffness::new(grid);
    let n = v.states.len();
    let diff: Vec<f64> = v.states.iter().zip(&w.states).map(|(a, b)| h_diff_sq(grid, a, b)).collect();
    let wn: Vec<f64> = w.states.iter().map(|s| k.form(&s.v1, &s.v1) + k.form(&s.v2, &s.v2)).collect();
    let mut cum = vec![0.0; n];
    for m in 1..n {
        cum[m] = cum[m - 1] + 0.5 * v.dt_sample * (wn[m - 1] + wn[m]);
    }
    let rate = 2.0 / nu * c_lady.powi(4);
    let mut entries = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            let integral_w = cum[b] - cum[a];
            let bound = diff[a] * (rate * integral_w).exp();
            let holds = diff[b] <= bound * (1.0 + 1e-9) + 1e-300;
            entries.push(ContractionEntry {
                tau: v.states[a].t,
                t: v.states[b].t,
                diff_sq: diff[b],
                diff_sq_tau: diff[a],
                integral_w,
                bound,
                holds,
            });
        }
    }
    let dist = xl_distance(v, w, grid)?;
    let lipschitz_observed = if dist > 0.0 {
        diff[n - 1].sqrt() * v.l.sqrt() / dist
    } else {
        0.0
    };
    Ok(ContractionLedger {
        c_lady,
        nu,
        all_hold: entries.iter().all(|e| e.holds),
        entries,
        lipschitz_observed,
        lipschitz_bound: (0.5 * rate * cum[n - 1]).exp(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionReport {
    pub eps: Vec<f64>,
    /// Occupied boxes `N_ε`, nonincreasing in `ε`.
    pub box_counts: Vec<usize>,
    pub box_dimension: f64,
    /// Fraction of point pairs closer than each `ε`.
    pub correlation_sum: Vec<f64>,
    /// `None` when no radius has enough pairs below the saturation cutoff.
    pub correlation_dimension: Option<f64>,
    /// Number of projected coordinates.
    pub rank: usize,
    pub retained_variance: f64,
    pub n_points: usize,
    /// Every point coincides; both dimensions are reported as 0.
    pub degenerate: bool,
    pub attraction_rate: Option<f64>,
}

/// Principal coordinates of the segment ensemble under the X_l inner product.
pub fn project_segments(segments: &[TrajectorySegment], m: usize, grid: &MappedGrid) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = segments.len();
    for s in &segments[1..] {
        check_compatible(&segments[0], s)?;
    }
    let w = segments[0].weights();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n)
                .map(|b| {
                    segments[a]
                        .states
                        .iter()
                        .zip(&segments[b].states)
                        .zip(&w)
                        .map(|((x, y), w)| w * h_dot(grid, x, y))
                        .sum()
                })
                .collect()
        })
        .collect();
    let g = DMatrix::from_fn(n, n, |a, b| rows[a][b]);
    let row_mean: Vec<f64> = (0..n).map(|a| g.row(a).sum() / n as f64).collect();
    let all_mean = row_mean.iter().sum::<f64>() / n as f64;
    let gc = DMatrix::from_fn(n, n, |a, b| g[(a, b)] - row_mean[a] - row_mean[b] + all_mean);
    let eig = SymmetricEigen::new(gc);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut kept = 0.0;
    let mut coords = vec![vec![0.0; m]; n];
    for (c, &e) in order.iter().take(m).enumerate() {
        let lam = eig.eigenvalues[e].max(0.0);
        kept += lam;
        let s = lam.sqrt();
        for a in 0..n {
            coords[a][c] = s * eig.eigenvectors[(a, e)];
        }
    }
    let retained = if total > 0.0 { kept / total } else { 1.0 };
    Ok((coords, retained))
}

/// Box counting and correlation sums on a point cloud.
pub fn dimension_from_points(points: &[Vec<f64>], eps: &[f64]) -> Result<DimensionReport> {
    if points.len() < 2 {
        return Err(Error::Analysis("dimension estimate needs at least two points".into()));
    }
    if eps.len() < 2 || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Parameter {
            name: "eps",
            reason: "ladder needs at least two positive radii".into(),
        });
    }
    let mut eps = eps.to_vec();
    eps.sort_by(f64::total_cmp);
    let n = points.len();
    let rank = points[0].len();
    let lo: Vec<f64> = (0..rank)
        .map(|c| points.iter().map(|p| p[c]).fold(f64::INFINITY, f64::min))
        .collect();
    let box_counts: Vec<usize> = eps
        .iter()
        .map(|&e| {
            points
                .iter()
                .map(|p| p.iter().zip(&lo).map(|(x, l)| ((x - l) / e).floor() as i64).collect::<Vec<_>>())
                .collect::<HashSet<_>>()
                .len()
        })
        .collect();
    let mut dists: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            (a + 1..n).map(move |b| {
                points[a]
                    .iter()
                    .zip(&points[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    let n_pairs = dists.len();
    let pair_counts: Vec<usize> = eps.iter().map(|&e| dists.partition_point(|&d| d < e)).collect();
    let correlation_sum: Vec<f64> = pair_counts.iter().map(|&c| c as f64 / n_pairs as f64).collect();
    let degenerate = dists[n_pairs - 1] <= 1e-12;
    let mut report = DimensionReport {
        eps: eps.clone(),
        box_counts: box_counts.clone(),
        box_dimension: 0.0,
        correlation_sum: correlation_sum.clone(),
        correlation_dimension: None,
        rank,
        retained_variance: 1.0,
        n_points: n,
        degenerate,
        attraction_rate: None,
    };
    if degenerate {
        report.correlation_dimension = Some(0.0);
        return Ok(report);
    }
    let (bx, by): (Vec<f64>, Vec<f64>) = eps
        .iter()
        .zip(&box_counts)
        .filter(|(_, &c)| c > 1 && 2 * c <= n)
        .map(|(e, &c)| (-e.ln(), (c as f64).ln()))
        .unzip();
    report.box_dimension = if box_counts.iter().all(|&c| c == 1) {
        0.0
    } else if bx.len() >= 2 {
        linear_fit(&bx, &by).1
    } else {
        return Err(Error::Analysis("no scaling regime for box counting".into()));
    };
    let (cx, cy): (Vec<f64>, Vec<f64>) = eps
        .iter()
        .zip(&pair_counts)
        .zip(&correlation_sum)
        .filter(|((_, &k), &c)| k >= 20 && c <= 0.05)
        .map(|((e, _), &c)| (e.ln(), c.ln()))
        .unzip();
    if cx.len() >= 2 {
        report.correlation_dimension = Some(linear_fit(&cx, &cy).1);
    }
    Ok(report)
}

/// PCA projection to rank `m` followed by [`dimension_from_points`].
pub fn dimension_estimate(
    segments: &[TrajectorySegment],
    m: usize,
    eps: &[f64],
    grid: &MappedGrid,
) -> Result<DimensionReport> {
    if segments.len() < 50 {
        return Err(Error::Analysis(format!(
            "dimension estimate needs at least 50 segments, got {}",
            segments.len()
        )));
    }
    if m < 2 {
        return Err(Error::Parameter {
            name: "m",
            reason: format!("projection rank must be at least 2, got {m}"),
        });
    }
    let (coords, retained) = project_segments(segments, m, grid)?;
    let mut report = dimension_from_points(&coords, eps)?;
    report.retained_variance = retained;
    Ok(report)
}

/// Decay rate `c1` of the median H-distance from fresh trajectories to a sampled attractor.
///
/// `fresh[r][n]` is run `r` at the common time `times[n]`. Returns `(c1, r2)`.
pub fn attraction_rate(times: &[f64], fresh: &[Vec<State>], attractor: &[State], grid: &MappedGrid) -> Result<(f64, f64)> {
    if fresh.is_empty() || attractor.is_empty() || times.len() < 2 {
        return Err(Error::Analysis("attraction fit needs runs, attractor samples and two times".into()));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (n, &t) in times.iter().enumerate() {
        let mut d: Vec<f64> = fresh
            .iter()
            .map(|run| {
                attractor
                    .iter()
                    .map(|a| h_diff_sq(grid, &run[n], a))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .collect();
        d.sort_by(f64::total_cmp);
        let med = d[d.len() / 2];
        if med > 0.0 {
            x.push(t);
            y.push(med.ln());
        }
    }
    if x.len() < 2 {
        return Err(Error::Analysis("fresh trajectories already lie on the sampled set".into()));
    }
    let (_, b, r2) = linear_fit(&x, &y);
    Ok((-b, r2))
}

/// Uniform samples of a circle of radius `r` in the first two of `m` coordinates.
pub fn synthetic_circle(n: usize, r: f64, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = rng.gen_range(0.0..2.0 * PI);
            let mut p = vec![0.0; m.max(2)];
            p[0] = r * a.cos();
            p[1] = r * a.sin();
            p
        })
        .collect()
}

/// Uniform samples of the flat torus `(cos a, sin a, cos b, sin b)·r` padded to `m` coordinates.
pub fn synthetic_torus(n: usize, r: f64, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = rng.gen_range(0.0..2.0 * PI);
            let b = rng.gen_range(0.0..2.0 * PI);
            let mut p = vec![0.0; m.max(4)];
            p[0] = r * a.cos();
            p[1] = r * a.sin();
            p[2] = r * b.cos();
            p[3] = r * b.sin();
            p
        })
        .collect()
}

/// Geometric ladder of `n` radii from `lo` to `hi`.
pub fn geometric_ladder(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}
