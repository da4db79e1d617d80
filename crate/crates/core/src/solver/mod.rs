//! Discrete forms, projection and the IMEX time integrator for the regularized problem.

mod ops;
mod projection;
mod run;
mod stepper;

pub use ops::{
    a_form, advect_skew, apply_bc, b_skew, divergence, divergence_flux_interior, element_stiffness,
    forcing_term, g_pairing, grad1, grad1_t, grad2, grad2_t, l_functional, v1_free, v2_free, Stiffness,
    Vel,
};
pub use projection::{Projection, Projector};
pub use run::{run, run_with, MemorySink, RunSummary, Snapshot, SnapshotSink};
pub use stepper::{step, StepStats, Stepper};

use crate::error::{check_len, Error, Result};
use crate::geometry::MappedGrid;
use crate::linalg::max_abs;

/// Perturbation velocity and pressure at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn zeros(grid: &MappedGrid) -> Self {
        let n = grid.n_nodes();
        Self {
            v1: vec![0.0; n],
            v2: vec![0.0; n],
            p: vec![0.0; n],
            t: 0.0,
        }
    }

    pub fn from_velocity(grid: &MappedGrid, v1: Vec<f64>, v2: Vec<f64>, t: f64) -> Result<Self> {
        check_len(grid.n_nodes(), v1.len())?;
        check_len(grid.n_nodes(), v2.len())?;
        Ok(Self {
            p: vec![0.0; v1.len()],
            v1,
            v2,
            t,
        })
    }

    pub fn velocity(&self) -> Vel<'_> {
        (&self.v1, &self.v2)
    }

    pub fn check_shape(&self, grid: &MappedGrid) -> Result<()> {
        for f in [&self.v1, &self.v2, &self.p] {
            check_len(grid.n_nodes(), f.len())?;
        }
        Ok(())
    }

    /// Largest violation of the wall conditions.
    pub fn boundary_violation(&self, grid: &MappedGrid) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..grid.nq {
            worst = worst
                .max(self.v1[grid.idx(i, grid.ns)].abs())
                .max(self.v2[grid.idx(i, grid.ns)].abs())
                .max(self.v2[grid.idx(i, 0)].abs());
        }
        worst
    }

    pub fn max_divergence(&self, grid: &MappedGrid) -> f64 {
        max_abs(&divergence(grid, &self.v1, &self.v2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub nu: f64,
    pub dt: f64,
    /// Courant limit enforced on every step.
    pub cfl: f64,
    pub proj_tol: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub t_end: f64,
    pub snapshot_dt: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nu", self.nu),
            ("dt", self.dt),
            ("cfl", self.cfl),
            ("proj_tol", self.proj_tol),
            ("picard_tol", self.picard_tol),
            ("snapshot_dt", self.snapshot_dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Parameter {
                name: "T_end",
                reason: format!("must be non-negative, got {}", self.t_end),
            });
        }
        if self.picard_max < 1 {
            return Err(Error::Parameter {
                name: "picard_max",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Number of steps of size `dt` covering `span`, if `span` is a whole multiple.
    pub fn steps_in(&self, span: f64, name: &'static str) -> Result<usize> {
        let n = (span / self.dt).round();
        if (n * self.dt - span).abs() > 1e-9 * span.abs().max(self.dt) {
            return Err(Error::Parameter {
                name,
                reason: format!("{span} is not a whole multiple of dt = {}", self.dt),
            });
        }
        Ok(n as usize)
    }
}

/// Project an arbitrary velocity onto admissible divergence-free fields.
pub fn project_divergence_free(state: &State, grid: &MappedGrid, proj_tol: f64) -> Result<State> {
    state.check_shape(grid)?;
    let projector = Projector::new(grid)?;
    let out = projector.project(grid, &state.v1, &state.v2, proj_tol)?;
    Ok(State {
        v1: out.v1,
        v2: out.v2,
        p: out.phi,
        t: state.t,
    })
}
