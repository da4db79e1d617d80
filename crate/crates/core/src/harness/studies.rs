//! Constants, trajectory and dimension studies driven by a run config.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::background::{build_background, hopf_ratio_with, ALPHA_LADDER};
use crate::diagnostics::{
    absorbing_check, estimate_ladyzhenskaya_with, estimate_poincare_with, AbsorbingReport, ConstantsEstimate,
};
use crate::dynamics::{
    attraction_rate, contraction_ledger, dimension_estimate, holder_fit, shift_segment, time_regularity_monitor,
    xl_distance, ContractionLedger,
    DimensionReport, HolderFit, StoredRun, TrajectorySegment,
};
use crate::error::{Error, Result};
use crate::geometry::MappedGrid;
use crate::sampling::random_admissible;
use crate::solver::{run_with, MemorySink, Projector, RunSummary, State, Stepper};

use super::config::{InitKind, RunConfig};
use super::initial_state;

#[derive(Debug, Clone, Serialize)]
pub struct HopfRung {
    pub alpha: f64,
    /// `None` when the layer is under-resolved on this grid.
    pub ratio: Option<f64>,
    pub forcing: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsReport {
    pub estimate: ConstantsEstimate,
    pub nu: f64,
    /// `ν/4`.
    pub hopf_limit: f64,
    pub ladder: Vec<HopfRung>,
    /// Largest ladder `alpha` whose sampled ratio stays below `ν/4`.
    pub admissible_alpha: Option<f64>,
    pub poincare_iterations: usize,
}

/// `λ1`, `c_lady`, `F` and the Hopf ratio over the layer ladder plus the configured `alpha`.
pub fn constants_report(cfg: &RunConfig, n_lady: usize, n_hopf: usize) -> Result<ConstantsReport> {
    let seed = cfg.require_seed("the constants estimates")?;
    let grid = cfg.grid()?;
    let projector = Projector::new(&grid)?;
    let poincare = estimate_poincare_with(&grid, &projector)?;
    let lady = estimate_ladyzhenskaya_with(&grid, &projector, n_lady, seed)?;
    let xi = cfg.background_flow(&grid)?;
    let hopf = hopf_ratio_with(&xi, &grid, &projector, n_hopf, seed)?;
    let nu = cfg.solver.nu;
    let mut ladder = Vec::new();
    for &alpha in &ALPHA_LADDER {
        match build_background(cfg.background.u0, alpha, &grid, nu) {
            Ok(x) => {
                let r = hopf_ratio_with(&x, &grid, &projector, n_hopf, seed)?;
                ladder.push(HopfRung {
                    alpha,
                    ratio: Some(r.ratio),
                    forcing: Some(x.forcing_bound),
                });
            }
            Err(Error::BackgroundUnderResolved { .. }) => ladder.push(HopfRung {
                alpha,
                ratio: None,
                forcing: None,
            }),
            Err(e) => return Err(e),
        }
    }
    let admissible_alpha = ladder
        .iter()
        .filter(|r| r.ratio.is_some_and(|x| x <= nu / 4.0))
        .map(|r| r.alpha)
        .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |b| b.max(a))));
    Ok(ConstantsReport {
        estimate: ConstantsEstimate {
            lambda1: poincare.lambda1,
            c_lady: lady.c_lady,
            hopf_ratio: hopf.ratio,
            f: xi.forcing_bound,
        },
        nu,
        hopf_limit: nu / 4.0,
        ladder,
        admissible_alpha,
        poincare_iterations: poincare.iterations,
    })
}

/// A run kept in memory at snapshot cadence.
#[derive(Debug, Clone)]
pub struct MemberRun {
    pub summary: RunSummary,
    pub states: Vec<State>,
}

impl MemberRun {
    pub fn stored(&self) -> Result<StoredRun> {
        StoredRun::new(self.states.clone())
    }
}

/// Advance an arbitrary (projected on entry) initial state under `cfg`.
pub fn run_from_state(cfg: &RunConfig, v0: &State) -> Result<MemberRun> {
    let grid = cfg.grid()?;
    let xi = cfg.background_flow(&grid)?;
    let mut stepper = Stepper::new(&grid, &xi, &cfg.friction, &cfg.solver)?;
    let p = stepper.projector().project(&grid, &v0.v1, &v0.v2, cfg.solver.proj_tol)?;
    let start = State {
        v1: p.v1,
        v2: p.v2,
        p: v0.p.clone(),
        t: v0.t,
    };
    let mut sink = MemorySink::default();
    let summary = run_with(&mut stepper, start, &cfg.friction, &xi, &mut [&mut sink])?;
    Ok(MemberRun {
        summary,
        states: sink.states,
    })
}

/// `cfg` with a random initial condition of the given H-norm and seed (zero amplitude means rest).
pub fn member_config(cfg: &RunConfig, amplitude: f64, seed: u64) -> RunConfig {
    let mut c = cfg.clone();
    c.init.kind = if amplitude > 0.0 { InitKind::Random } else { InitKind::Zero };
    c.init.amplitude = amplitude;
    c.analysis.seed = Some(seed);
    c.output.out = None;
    c
}

pub fn run_member(cfg: &RunConfig, amplitude: f64, seed: u64) -> Result<MemberRun> {
    let c = member_config(cfg, amplitude, seed);
    let grid = c.grid()?;
    let projector = Projector::new(&grid)?;
    let v0 = initial_state(&c, &grid, &projector)?;
    run_from_state(&c, &v0)
}

/// Independent members `(amplitude, seed)` run in parallel; results keep input order.
pub fn run_ensemble(cfg: &RunConfig, members: &[(f64, u64)]) -> Result<Vec<MemberRun>> {
    members.par_iter().map(|&(a, s)| run_member(cfg, a, s)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AbsorbingMember {
    pub amplitude: f64,
    pub seed: u64,
    pub report: AbsorbingReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct AbsorbingStudy {
    pub lambda1: f64,
    pub forcing: f64,
    /// `ρ = (2F/(νλ1))^½`.
    pub rho: f64,
    pub members: Vec<AbsorbingMember>,
}

/// `n` random initial conditions with `|v0|` spread evenly up to `max_factor · ρ`.
pub fn absorbing_study(cfg: &RunConfig, lambda1: f64, n: usize, max_factor: f64) -> Result<AbsorbingStudy> {
    let seed = cfg.require_seed("the absorbing-ball ensemble")?;
    let grid = cfg.grid()?;
    let f = cfg.background_flow(&grid)?.forcing_bound;
    let nu = cfg.solver.nu;
    let rho = (2.0 * f / (nu * lambda1)).sqrt();
    let plan: Vec<(f64, u64)> = (0..n)
        .map(|k| (rho * max_factor * (k + 1) as f64 / n as f64, seed.wrapping_add(k as u64)))
        .collect();
    let runs = run_ensemble(cfg, &plan)?;
    let members = plan
        .iter()
        .zip(&runs)
        .map(|(&(amplitude, seed), run)| {
            Ok(AbsorbingMember {
                amplitude,
                seed,
                report: absorbing_check(&run.summary.records, lambda1, f, nu)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AbsorbingStudy {
        lambda1,
        forcing: f,
        rho,
        members,
    })
}

/// Runs from `v0` and from `v0 + ε·d` with `d` a random unit admissible direction.
pub fn perturbed_pair(cfg: &RunConfig, amplitude: f64, eps: f64, seed: u64) -> Result<(MemberRun, MemberRun, f64)> {
    let c = member_config(cfg, amplitude, seed);
    let grid = c.grid()?;
    let projector = Projector::new(&grid)?;
    let v0 = initial_state(&c, &grid, &projector)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let (d1, d2) = random_admissible(&grid, &projector, &mut rng, c.solver.proj_tol)?;
    let norm = (grid.dot_w(&d1, &d1) + grid.dot_w(&d2, &d2)).sqrt();
    if !(norm > 0.0) {
        return Err(Error::DegenerateSamples);
    }
    let s = eps / norm;
    let w1: Vec<f64> = v0.v1.iter().zip(&d1).map(|(a, b)| a + s * b).collect();
    let w2: Vec<f64> = v0.v2.iter().zip(&d2).map(|(a, b)| a + s * b).collect();
    let w0 = State::from_velocity(&grid, w1, w2, v0.t)?;
    let a = run_from_state(&c, &v0)?;
    let b = run_from_state(&c, &w0)?;
    let d0 = h_distance(&grid, &a.states[0], &b.states[0]);
    Ok((a, b, d0))
}

pub fn h_distance(grid: &MappedGrid, a: &State, b: &State) -> f64 {
    let d1: Vec<f64> = a.v1.iter().zip(&b.v1).map(|(x, y)| x - y).collect();
    let d2: Vec<f64> = a.v2.iter().zip(&b.v2).map(|(x, y)| x - y).collect();
    (grid.dot_w(&d1, &d1) + grid.dot_w(&d2, &d2)).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionPair {
    pub seed: u64,
    pub initial_distance: f64,
    pub ledger: ContractionLedger,
}

/// Gronwall ledger for `n` perturbed pairs over the window `[0, l]`.
pub fn contraction_study(cfg: &RunConfig, n: usize, amplitude: f64, eps: f64, c_lady: f64) -> Result<Vec<ContractionPair>> {
    let seed = cfg.require_seed("the contraction pairs")?;
    let grid = cfg.grid()?;
    let l = cfg.analysis.l;
    (0..n)
        .map(|k| {
            let s = seed.wrapping_add(k as u64);
            let (v, w, d0) = perturbed_pair(cfg, amplitude, eps, s)?;
            let sv = v.stored()?.segment(0.0, l)?;
            let sw = w.stored()?.segment(0.0, l)?;
            Ok(ContractionPair {
                seed: s,
                initial_distance: d0,
                ledger: contraction_ledger(&sv, &sw, c_lady, cfg.solver.nu, &grid)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaRung {
    pub delta: f64,
    /// `max y(t)` on `[η, T]`.
    pub y_max: f64,
    pub max_energy_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaLadder {
    pub rungs: Vec<DeltaRung>,
    /// `‖v_{δ_k} − v_{δ_{k+1}}‖_{L²(0,T;H)}` for consecutive rungs.
    pub differences: Vec<f64>,
}

/// Same initial data and forcing under each `delta`; also monitors `y(t)` per rung.
pub fn delta_ladder(cfg: &RunConfig, deltas: &[f64]) -> Result<DeltaLadder> {
    let grid = cfg.grid()?;
    let t_end = cfg.solver.t_end;
    let runs: Vec<MemberRun> = deltas
        .par_iter()
        .map(|&d| {
            let mut c = cfg.clone();
            c.friction.delta = d;
            c.output.out = None;
            let projector = Projector::new(&grid)?;
            let v0 = initial_state(&c, &grid, &projector)?;
            run_from_state(&c, &v0)
        })
        .collect::<Result<_>>()?;
    let mut rungs = Vec::new();
    let mut segments = Vec::new();
    for (&d, run) in deltas.iter().zip(&runs) {
        let stored = run.stored()?;
        let mut fm = cfg.friction;
        fm.delta = d;
        let y = time_regularity_monitor(&stored, cfg.solver.dt, &fm, cfg.solver.nu, &grid, cfg.analysis.eta)?;
        rungs.push(DeltaRung {
            delta: d,
            y_max: y.max_on_window,
            max_energy_residual: run.summary.max_residual,
        });
        segments.push(stored.segment(stored.t_start(), t_end - stored.t_start())?);
    }
    let differences = segments
        .windows(2)
        .map(|w| xl_distance(&w[0], &w[1], &grid))
        .collect::<Result<_>>()?;
    Ok(DeltaLadder { rungs, differences })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryReport {
    pub t0: f64,
    pub l: f64,
    pub shifts: Vec<f64>,
    /// Row-major `‖L_{s_a}χ − L_{s_b}χ‖_{X_l}`.
    pub distances: Vec<Vec<f64>>,
    pub holder: HolderFit,
}

impl TrajectoryReport {
    pub fn distance_csv(&self) -> String {
        let mut s = String::from("shift_a,shift_b,distance\n");
        for (a, row) in self.shifts.iter().zip(&self.distances) {
            for (b, d) in self.shifts.iter().zip(row) {
                s.push_str(&format!("{a:.17e},{b:.17e},{d:.17e}\n"));
            }
        }
        s
    }
}

/// Shifted windows of one run after burn-in, their distances and the Hölder fit.
pub fn trajectory_study(cfg: &RunConfig, run: &MemberRun, shifts: &[f64]) -> Result<TrajectoryReport> {
    let grid = cfg.grid()?;
    let stored = subsample(run.stored()?, cfg.analysis.dt_sample)?;
    let t0 = cfg.analysis.t_burn;
    let chi = stored.segment(t0, cfg.analysis.l)?;
    let windows: Vec<TrajectorySegment> = shifts
        .iter()
        .map(|&s| shift_segment(&chi, s, &stored))
        .collect::<Result<_>>()?;
    let distances = windows
        .iter()
        .map(|a| windows.iter().map(|b| xl_distance(a, b, &grid)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let holder = holder_fit(&chi, shifts, &stored, &grid)?;
    Ok(TrajectoryReport {
        t0,
        l: cfg.analysis.l,
        shifts: shifts.to_vec(),
        distances,
        holder,
    })
}

/// Keep every `dt_sample / dt_snapshot`-th state.
pub fn subsample(run: StoredRun, dt_sample: f64) -> Result<StoredRun> {
    let r = dt_sample / run.dt_sample;
    let stride = r.round();
    if stride < 1.0 || (r - stride).abs() > 1e-9 * r {
        return Err(Error::Parameter {
            name: "dt_sample",
            reason: format!("{dt_sample} is not a multiple of the snapshot cadence {}", run.dt_sample),
        });
    }
    let stride = stride as usize;
    StoredRun::new(run.states.into_iter().step_by(stride).collect())
}

/// Ensemble of `cfg.analysis.ensemble` random runs, one post-burn-in window each.
pub fn dimension_study(cfg: &RunConfig, amplitude: f64, m: usize, eps: &[f64]) -> Result<DimensionReport> {
    let seed = cfg.require_seed("the dimension ensemble")?;
    let grid = cfg.grid()?;
    let a = &cfg.analysis;
    let plan: Vec<(f64, u64)> = (0..a.ensemble).map(|k| (amplitude, seed.wrapping_add(k as u64))).collect();
    let runs = run_ensemble(cfg, &plan)?;
    let fresh: Vec<Vec<State>> = runs
        .iter()
        .map(|r| subsample(r.stored()?, a.dt_sample).map(|s| s.states))
        .collect::<Result<_>>()?;
    let mut segments = Vec::with_capacity(runs.len());
    let mut attractor = Vec::new();
    for states in &fresh {
        let seg = StoredRun::new(states.clone())?.segment(a.t_burn, a.l)?;
        attractor.extend(seg.states.iter().cloned());
        segments.push(seg);
    }
    let mut report = dimension_estimate(&segments, m, eps, &grid)?;
    let n_fresh = ((a.t_burn / a.dt_sample).round() as usize).min(fresh[0].len());
    if n_fresh >= 2 {
        let times: Vec<f64> = fresh[0][..n_fresh].iter().map(|s| s.t).collect();
        if let Ok((c1, _)) = attraction_rate(&times, &fresh, &attractor, &grid) {
            report.attraction_rate = Some(c1);
        }
    }
    Ok(report)
}

/// Ladyzhenskaya constants on two resolutions of the same channel.
pub fn ladyzhenskaya_refinement(cfg: &RunConfig, factor: usize, n: usize) -> Result<(f64, f64)> {
    let seed = cfg.require_seed("the Ladyzhenskaya estimate")?;
    let coarse = cfg.grid()?;
    let mut fine_geom = cfg.geometry.clone();
    fine_geom.nq *= factor;
    fine_geom.ns *= factor;
    let fine = crate::geometry::build_grid(&fine_geom)?;
    let a = estimate_ladyzhenskaya_with(&coarse, &Projector::new(&coarse)?, n, seed)?;
    let b = estimate_ladyzhenskaya_with(&fine, &Projector::new(&fine)?, n, seed)?;
    Ok((a.c_lady, b.c_lady))
}
