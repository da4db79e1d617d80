use std::time::Instant;

use crate::background::BackgroundFlow;
use crate::diagnostics::{energy_record, energy_residual_values, EnergyRecord};
use crate::error::{Error, Result};
use crate::friction::{j_delta, FrictionModel, WallTrace};
use crate::geometry::MappedGrid;

use super::stepper::Stepper;
use super::{SolverConfig, State};

/// Everything emitted at one output instant.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub state: &'a State,
    pub record: &'a EnergyRecord,
    pub slip: &'a WallTrace,
    pub stress: &'a WallTrace,
    pub comp: &'a [f64],
}

pub trait SnapshotSink {
    fn snapshot(&mut self, snap: &Snapshot<'_>) -> Result<()>;
}

/// Keeps every snapshot state in memory.
#[derive(Debug, Clone, Default)]
pub struct MemorySink {
    pub states: Vec<State>,
}

impl SnapshotSink for MemorySink {
    fn snapshot(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        self.states.push(snap.state.clone());
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dt: f64,
    pub t_start: f64,
    pub steps: usize,
    pub records: Vec<EnergyRecord>,
    /// Energy residual of every step, in order.
    pub step_residuals: Vec<f64>,
    /// `‖v‖²` after every step, starting with the initial state.
    pub step_v_norm_sq: Vec<f64>,
    pub max_residual: f64,
    pub max_picard_iterations: usize,
    pub picard_nonmonotone_steps: usize,
    pub max_divergence: f64,
    pub final_state: State,
    pub history: Option<(Vec<f64>, Vec<f64>)>,
    pub wall_seconds: f64,
}

/// Advance `v0` to `cfg.t_end` from a cold start, projecting the initial data first.
pub fn run(
    v0: &State,
    cfg: &SolverConfig,
    fm: &FrictionModel,
    xi: &BackgroundFlow,
    grid: &MappedGrid,
    sinks: &mut [&mut dyn SnapshotSink],
) -> Result<RunSummary> {
    v0.check_shape(grid)?;
    let mut stepper = Stepper::new(grid, xi, fm, cfg)?;
    let proj = stepper.projector().project(grid, &v0.v1, &v0.v2, cfg.proj_tol)?;
    let start = State {
        v1: proj.v1,
        v2: proj.v2,
        p: v0.p.clone(),
        t: v0.t,
    };
    run_with(&mut stepper, start, fm, xi, sinks)
}

/// Advance an admissible state with a prepared stepper (history included) to `t_end`.
pub fn run_with(
    stepper: &mut Stepper,
    start: State,
    fm: &FrictionModel,
    xi: &BackgroundFlow,
    sinks: &mut [&mut dyn SnapshotSink],
) -> Result<RunSummary> {
    let clock = Instant::now();
    let cfg = *stepper.config();
    let grid = stepper.grid().clone();
    let t_start = start.t;
    if t_start > cfg.t_end + 1e-12 {
        return Err(Error::Parameter {
            name: "T_end",
            reason: format!("start time {t_start} lies beyond T_end = {}", cfg.t_end),
        });
    }
    let steps = cfg.steps_in(cfg.t_end - t_start, "T_end")?;
    let per_snap = cfg.steps_in(cfg.snapshot_dt, "snapshot_dt")?.max(1);
    let offset = cfg.steps_in(t_start, "t")?;
    let f = xi.forcing_bound;
    let nu = cfg.nu;

    let mut records = Vec::new();
    let kform = |s: &State, st: &Stepper| st.stiffness().form(&s.v1, &s.v1) + st.stiffness().form(&s.v2, &s.v2);
    let hform = |s: &State| grid.dot_w(&s.v1, &s.v1) + grid.dot_w(&s.v2, &s.v2);
    let jform = |s: &State| j_delta(fm, &WallTrace::new(grid.bottom_row(&s.v1)), &grid);

    let mut state = start;
    let mut cur = (hform(&state), kform(&state, stepper), jform(&state)?);
    let mut step_residuals = Vec::with_capacity(steps);
    let mut step_v = Vec::with_capacity(steps + 1);
    step_v.push(cur.1);
    let mut max_picard = 0;
    let mut nonmono = 0;
    let mut max_div = state.max_divergence(&grid);

    emit(&state, &grid, stepper, fm, xi, nu, f64::NAN, sinks, &mut records)?;

    for n in 1..=steps {
        let (next, stats) = stepper.step(&state)?;
        let nxt = (hform(&next), kform(&next, stepper), jform(&next)?);
        let r = energy_residual_values(cur, nxt, cfg.dt, nu, f)?;
        step_residuals.push(r);
        step_v.push(nxt.1);
        max_picard = max_picard.max(stats.picard_iterations);
        if stats.picard_nonmonotone {
            nonmono += 1;
        }
        max_div = max_div.max(stats.divergence);
        state = next;
        cur = nxt;
        if (offset + n) % per_snap == 0 {
            emit(&state, &grid, stepper, fm, xi, nu, r, sinks, &mut records)?;
        }
    }
    let max_residual = step_residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(RunSummary {
        dt: cfg.dt,
        t_start,
        steps,
        records,
        step_residuals,
        step_v_norm_sq: step_v,
        max_residual,
        max_picard_iterations: max_picard,
        picard_nonmonotone_steps: nonmono,
        max_divergence: max_div,
        final_state: state,
        history: stepper.history().cloned(),
        wall_seconds: clock.elapsed().as_secs_f64(),
    })
}

#[allow(clippy::too_many_arguments)]
fn emit(
    state: &State,
    grid: &MappedGrid,
    stepper: &Stepper,
    fm: &FrictionModel,
    xi: &BackgroundFlow,
    nu: f64,
    residual: f64,
    sinks: &mut [&mut dyn SnapshotSink],
    records: &mut Vec<EnergyRecord>,
) -> Result<()> {
    let (rec, slip, stress, comp) = energy_record(state, grid, stepper.stiffness(), fm, xi, nu, residual)?;
    for sink in sinks.iter_mut() {
        sink.snapshot(&Snapshot {
            state,
            record: &rec,
            slip: &slip,
            stress: &stress,
            comp: &comp,
        })?;
    }
    records.push(rec);
    Ok(())
}
