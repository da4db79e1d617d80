//! Configuration, orchestration, outputs and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod couette;
pub mod output;
pub mod studies;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::MappedGrid;
use crate::sampling::random_admissible;
use crate::solver::{run_with, Projector, RunSummary, Snapshot, SnapshotSink, State, Stepper};

use checkpoint::{Checkpoint, CheckpointHeader};
use config::{InitKind, RunConfig};
use output::{write_outputs, RunManifest, RunTiming, TraceSink};

pub use checkpoint::{checkpoint_roundtrip, load_checkpoint, save_checkpoint};
pub use config::parse_config;
pub use output::verify_manifest;

/// Random admissible field rescaled to `|v|_H = amplitude`.
pub fn random_initial(grid: &MappedGrid, projector: &Projector, amplitude: f64, seed: u64, tol: f64) -> Result<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut v1, mut v2) = random_admissible(grid, projector, &mut rng, tol)?;
    let norm = (grid.dot_w(&v1, &v1) + grid.dot_w(&v2, &v2)).sqrt();
    let s = if norm > 0.0 { amplitude / norm } else { 0.0 };
    v1.iter_mut().chain(v2.iter_mut()).for_each(|x| *x *= s);
    State::from_velocity(grid, v1, v2, 0.0)
}

pub fn initial_state(cfg: &RunConfig, grid: &MappedGrid, projector: &Projector) -> Result<State> {
    match cfg.init.kind {
        InitKind::Zero => Ok(State::zeros(grid)),
        InitKind::Random => random_initial(
            grid,
            projector,
            cfg.init.amplitude,
            cfg.require_seed("a random initial condition")?,
            cfg.solver.proj_tol,
        ),
    }
}

struct Tee<'a, 'b> {
    traces: &'a mut TraceSink,
    rest: &'a mut [&'b mut dyn SnapshotSink],
}

impl SnapshotSink for Tee<'_, '_> {
    fn snapshot(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        self.traces.snapshot(snap)?;
        for s in self.rest.iter_mut() {
            s.snapshot(snap)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub traces: TraceSink,
    pub checkpoint: Checkpoint,
    pub manifest: Option<RunManifest>,
}

fn finish(
    cfg: &RunConfig,
    summary: RunSummary,
    traces: TraceSink,
    out: Option<&Path>,
    started: f64,
) -> Result<RunOutcome> {
    let checkpoint = Checkpoint {
        header: CheckpointHeader::from_config(cfg, summary.final_state.t),
        state: summary.final_state.clone(),
        history: summary.history.clone(),
    };
    let manifest = match out {
        Some(dir) => {
            let timing = RunTiming {
                started_unix: started,
                finished_unix: RunTiming::now(),
            };
            let cp = cfg.output.checkpoint_final.then_some(&checkpoint);
            Some(write_outputs(dir, cfg, &summary, &traces, cp, timing)?)
        }
        None => None,
    };
    Ok(RunOutcome {
        summary,
        traces,
        checkpoint,
        manifest,
    })
}

/// Run a config from its initial condition, writing outputs when `out` is given.
pub fn run_config(cfg: &RunConfig, out: Option<&Path>, extra: &mut [&mut dyn SnapshotSink]) -> Result<RunOutcome> {
    let started = RunTiming::now();
    let grid = cfg.grid()?;
    let xi = cfg.background_flow(&grid)?;
    let mut stepper = Stepper::new(&grid, &xi, &cfg.friction, &cfg.solver)?;
    let v0 = initial_state(cfg, &grid, stepper.projector())?;
    let proj = stepper.projector().project(&grid, &v0.v1, &v0.v2, cfg.solver.proj_tol)?;
    let start = State {
        v1: proj.v1,
        v2: proj.v2,
        p: v0.p,
        t: v0.t,
    };
    let mut traces = TraceSink::new(&grid);
    let summary = {
        let mut tee = Tee {
            traces: &mut traces,
            rest: extra,
        };
        run_with(&mut stepper, start, &cfg.friction, &xi, &mut [&mut tee])?
    };
    finish(cfg, summary, traces, out, started)
}

/// Continue from a checkpoint, restoring the multistep history when it was saved.
pub fn resume(cfg: &RunConfig, cp: &Checkpoint, out: Option<&Path>, extra: &mut [&mut dyn SnapshotSink]) -> Result<RunOutcome> {
    let started = RunTiming::now();
    let grid = cfg.grid()?;
    cp.header.check_grid(&grid)?;
    cp.state.check_shape(&grid)?;
    let xi = cfg.background_flow(&grid)?;
    let mut stepper = Stepper::new(&grid, &xi, &cfg.friction, &cfg.solver)?;
    stepper.set_history(cp.history.clone());
    let mut traces = TraceSink::new(&grid);
    let summary = {
        let mut tee = Tee {
            traces: &mut traces,
            rest: extra,
        };
        run_with(&mut stepper, cp.state.clone(), &cfg.friction, &xi, &mut [&mut tee])?
    };
    finish(cfg, summary, traces, out, started)
}
