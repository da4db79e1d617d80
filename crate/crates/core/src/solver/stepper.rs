//! Adams–Bashforth / Crank–Nicolson step with implicit friction on the bottom wall.

use crate::background::BackgroundFlow;
use crate::error::{Error, Result};
use crate::friction::FrictionModel;
use crate::geometry::MappedGrid;
use crate::linalg::{dense_cholesky_solve, folded_position, BandedSpd};

use super::ops::{advect_skew, Stiffness};
use super::projection::Projector;
use super::{SolverConfig, State};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub picard_iterations: usize,
    pub picard_change: f64,
    /// Successive trace changes failed to decrease at least once.
    pub picard_nonmonotone: bool,
    pub projection_iterations: usize,
    pub divergence: f64,
    pub courant: f64,
}

/// Factored operators for one `(grid, dt, ν)` triple plus the multistep history.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: MappedGrid,
    xi: BackgroundFlow,
    fm: FrictionModel,
    cfg: SolverConfig,
    stiffness: Stiffness,
    projector: Projector,
    interior: BandedSpd,
    /// `(interior position, bottom column, value)` of the coupling block.
    coupling: Vec<(usize, usize, f64)>,
    schur: Vec<f64>,
    history: Option<(Vec<f64>, Vec<f64>)>,
}

impl Stepper {
    pub fn new(
        grid: &MappedGrid,
        xi: &BackgroundFlow,
        fm: &FrictionModel,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        Self::with_projector(grid, xi, fm, cfg, Projector::new(grid)?)
    }

    pub fn with_projector(
        grid: &MappedGrid,
        xi: &BackgroundFlow,
        fm: &FrictionModel,
        cfg: &SolverConfig,
        projector: Projector,
    ) -> Result<Self> {
        cfg.validate()?;
        fm.validate()?;
        let (nq, ns) = (grid.nq, grid.ns);
        let stiffness = Stiffness::new(grid);
        let n_int = nq * (ns - 1);
        let ipos = |node: usize| {
            let (i, j) = (node / (ns + 1), node % (ns + 1));
            (j - 1) * nq + folded_position(i, nq)
        };
        let half_nu = 0.5 * cfg.nu;
        let mut interior = BandedSpd::zeros(n_int, nq + 2);
        let mut bb = vec![0.0; nq * nq];
        let mut coupling = Vec::new();
        stiffness.for_each_entry(|r, c, v| {
            let (jr, jc) = (r % (ns + 1), c % (ns + 1));
            let (ir, ic) = (r / (ns + 1), c / (ns + 1));
            let v = half_nu * v;
            match (jr, jc) {
                (0, 0) => bb[ir * nq + ic] += v,
                (0, j) if j < ns => {
                    coupling.push((ipos(c), ir, v));
                }
                (j, k) if j > 0 && j < ns && k > 0 && k < ns => {
                    let (pr, pc) = (ipos(r), ipos(c));
                    if pr >= pc {
                        interior.add(pr, pc, v);
                    }
                }
                _ => {}
            }
        });
        for i in 0..nq {
            bb[i * nq + i] += grid.weights[grid.idx(i, 0)] / cfg.dt;
            for j in 1..ns {
                let node = grid.idx(i, j);
                interior.add(ipos(node), ipos(node), grid.weights[node] / cfg.dt);
            }
        }
        interior.factor()?;
        let mut schur = bb;
        let mut col = vec![0.0; n_int];
        for b in 0..nq {
            col.iter_mut().for_each(|x| *x = 0.0);
            for &(p, bc, v) in &coupling {
                if bc == b {
                    col[p] += v;
                }
            }
            interior.solve_in_place(&mut col);
            for &(p, br, v) in &coupling {
                schur[br * nq + b] -= v * col[p];
            }
        }
        Ok(Self {
            grid: grid.clone(),
            xi: xi.clone(),
            fm: *fm,
            cfg: *cfg,
            stiffness,
            projector,
            interior,
            coupling,
            schur,
            history: None,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &MappedGrid {
        &self.grid
    }

    pub fn stiffness(&self) -> &Stiffness {
        &self.stiffness
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    pub fn history(&self) -> Option<&(Vec<f64>, Vec<f64>)> {
        self.history.as_ref()
    }

    pub fn set_history(&mut self, history: Option<(Vec<f64>, Vec<f64>)>) {
        self.history = history;
    }

    fn interior_pos(&self, i: usize, j: usize) -> usize {
        (j - 1) * self.grid.nq + folded_position(i, self.grid.nq)
    }

    /// Explicit right side `−N(ξ + v, v) + (ν U'' − v2 U') e1`.
    pub fn explicit_term(&self, v1: &[f64], v2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let u1: Vec<f64> = v1.iter().zip(&self.xi.u).map(|(a, b)| a + b).collect();
        let u = (&u1[..], v2);
        let n1 = advect_skew(&self.grid, u, v1);
        let n2 = advect_skew(&self.grid, u, v2);
        let nu = self.cfg.nu;
        let e1 = (0..v1.len())
            .map(|m| -n1[m] - v2[m] * self.xi.du[m] + nu * self.xi.ddu[m])
            .collect();
        let e2 = n2.iter().map(|x| -x).collect();
        (e1, e2)
    }

    pub fn courant(&self, state: &State) -> f64 {
        let umax = state
            .v1
            .iter()
            .zip(&state.v2)
            .zip(&self.xi.u)
            .map(|((a, b), u)| ((a + u) * (a + u) + b * b).sqrt())
            .fold(0.0, f64::max);
        self.cfg.dt * umax / self.grid.min_spacing()
    }

    fn solve_interior(&self, rhs: &[f64]) -> Vec<f64> {
        let (nq, ns) = (self.grid.nq, self.grid.ns);
        let mut x = vec![0.0; nq * (ns - 1)];
        for i in 0..nq {
            for j in 1..ns {
                x[self.interior_pos(i, j)] = rhs[self.grid.idx(i, j)];
            }
        }
        self.interior.solve_in_place(&mut x);
        x
    }

    /// Advance one step; the state must already be admissible and projected.
    pub fn step(&mut self, state: &State) -> Result<(State, StepStats)> {
        self.advance(state).map_err(|e| Error::Step {
            t: state.t,
            source: Box::new(e),
        })
    }

    fn advance(&mut self, state: &State) -> Result<(State, StepStats)> {
        let courant = self.courant(state);
        if !(courant <= self.cfg.cfl) {
            return Err(Error::Cfl {
                t: state.t,
                courant,
                limit: self.cfg.cfl,
            });
        }
        let (e1, e2) = self.explicit_term(&state.v1, &state.v2);
        let (x1, x2) = match &self.history {
            Some((h1, h2)) => (
                e1.iter().zip(h1).map(|(a, b)| 1.5 * a - 0.5 * b).collect::<Vec<_>>(),
                e2.iter().zip(h2).map(|(a, b)| 1.5 * a - 0.5 * b).collect::<Vec<_>>(),
            ),
            None => {
                let (pred, _) = self.implicit_solve(state, &e1, &e2)?;
                let (p1, p2) = self.explicit_term(&pred.v1, &pred.v2);
                (
                    e1.iter().zip(&p1).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<_>>(),
                    e2.iter().zip(&p2).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<_>>(),
                )
            }
        };
        let (next, mut stats) = self.implicit_solve(state, &x1, &x2)?;
        stats.courant = courant;
        self.history = Some((e1, e2));
        Ok((next, stats))
    }

    /// Crank–Nicolson viscous step with explicit term `x`, Picard on the wall trace, then projection.
    fn implicit_solve(&self, state: &State, x1: &[f64], x2: &[f64]) -> Result<(State, StepStats)> {
        let g = &self.grid;
        let (nq, ns) = (g.nq, g.ns);
        let dt = self.cfg.dt;
        let k1 = self.stiffness.apply(&state.v1);
        let k2 = self.stiffness.apply(&state.v2);
        let half_nu = 0.5 * self.cfg.nu;
        let rhs = |v: &[f64], k: &[f64], x: &[f64]| -> Vec<f64> {
            (0..v.len())
                .map(|m| g.weights[m] * (v[m] / dt + x[m]) - half_nu * k[m])
                .collect()
        };
        let r1 = rhs(&state.v1, &k1, x1);
        let r2 = rhs(&state.v2, &k2, x2);

        let mut v2 = vec![0.0; g.n_nodes()];
        let y2 = self.solve_interior(&r2);
        for i in 0..nq {
            for j in 1..ns {
                v2[g.idx(i, j)] = y2[self.interior_pos(i, j)];
            }
        }

        let y1 = self.solve_interior(&r1);
        let mut rb: Vec<f64> = (0..nq).map(|i| r1[g.idx(i, 0)]).collect();
        for &(p, b, v) in &self.coupling {
            rb[b] -= v * y1[p];
        }
        let mut w: Vec<f64> = (0..nq).map(|i| state.v1[g.idx(i, 0)]).collect();
        let mut iterations = 0;
        let mut change = f64::INFINITY;
        let mut nonmonotone = false;
        let mut work = vec![0.0; nq * nq];
        loop {
            if iterations >= self.cfg.picard_max {
                return Err(Error::Picard {
                    t: state.t,
                    iterations,
                    residual: change,
                });
            }
            iterations += 1;
            work.copy_from_slice(&self.schur);
            for i in 0..nq {
                work[i * nq + i] += g.dq * self.fm.coefficient(w[i]);
            }
            let mut next = rb.clone();
            dense_cholesky_solve(&mut work, nq, &mut next)?;
            let c = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if c > change {
                nonmonotone = true;
            }
            change = c;
            w = next;
            let scale = 1.0 + w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if change <= self.cfg.picard_tol * scale {
                break;
            }
        }
        let mut x = vec![0.0; nq * (ns - 1)];
        for i in 0..nq {
            for j in 1..ns {
                x[self.interior_pos(i, j)] = r1[g.idx(i, j)];
            }
        }
        for &(p, b, v) in &self.coupling {
            x[p] -= v * w[b];
        }
        self.interior.solve_in_place(&mut x);
        let mut v1 = vec![0.0; g.n_nodes()];
        for i in 0..nq {
            v1[g.idx(i, 0)] = w[i];
            for j in 1..ns {
                v1[g.idx(i, j)] = x[self.interior_pos(i, j)];
            }
        }

        let proj = self.projector.project(g, &v1, &v2, self.cfg.proj_tol)?;
        let stats = StepStats {
            picard_iterations: iterations,
            picard_change: change,
            picard_nonmonotone: nonmonotone,
            projection_iterations: proj.iterations,
            divergence: proj.divergence,
            courant: 0.0,
        };
        Ok((
            State {
                v1: proj.v1,
                v2: proj.v2,
                p: proj.phi.iter().map(|x| x / dt).collect(),
                t: state.t + dt,
            },
            stats,
        ))
    }
}

/// Single step from a cold history (Heun predictor on the explicit term).
pub fn step(
    state: &State,
    cfg: &SolverConfig,
    fm: &FrictionModel,
    xi: &BackgroundFlow,
    grid: &MappedGrid,
) -> Result<State> {
    state.check_shape(grid)?;
    let mut stepper = Stepper::new(grid, xi, fm, cfg)?;
    Ok(stepper.step(state)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::build_background;
    use crate::geometry::{build_grid, ChannelGeometry, GapProfile};
    use crate::sampling::random_admissible;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(dt: f64) -> SolverConfig {
        SolverConfig {
            nu: 0.1,
            dt,
            cfl: 2.0,
            proj_tol: 1e-11,
            picard_tol: 1e-12,
            picard_max: 200,
            t_end: 1.0,
            snapshot_dt: dt,
        }
    }

    fn wavy(nq: usize, ns: usize) -> MappedGrid {
        let gap = GapProfile {
            mean: 1.0,
            cos: vec![0.1],
            sin: vec![0.05],
        };
        build_grid(&ChannelGeometry::new(2.0, gap, nq, ns).unwrap()).unwrap()
    }

    fn random_state(g: &MappedGrid, seed: u64) -> State {
        let p = Projector::new(g).unwrap();
        let (v1, v2) = random_admissible(g, &p, &mut ChaCha8Rng::seed_from_u64(seed), 1e-12).unwrap();
        State::from_velocity(g, v1, v2, 0.0).unwrap()
    }

    #[test]
    fn rest_is_an_equilibrium_without_wall_motion() {
        let g = wavy(16, 8);
        let xi = build_background(0.0, 0.5, &g, 0.1).unwrap();
        let fm = FrictionModel::new(0.2, 0.5, 1e-6).unwrap();
        let mut st = Stepper::new(&g, &xi, &fm, &cfg(0.02)).unwrap();
        let mut s = State::zeros(&g);
        for _ in 0..5 {
            s = st.step(&s).unwrap().0;
        }
        assert!(s.v1.iter().chain(&s.v2).all(|&x| x == 0.0));
        assert!((s.t - 0.1).abs() < 1e-12);
    }

    #[test]
    fn unforced_energy_decays_and_steps_stay_admissible() {
        let g = wavy(16, 8);
        let xi = build_background(0.0, 0.5, &g, 0.1).unwrap();
        let fm = FrictionModel::new(0.05, 0.5, 1e-6).unwrap();
        let mut st = Stepper::new(&g, &xi, &fm, &cfg(0.01)).unwrap();
        let mut s = random_state(&g, 3);
        let mut e = g.dot_w(&s.v1, &s.v1) + g.dot_w(&s.v2, &s.v2);
        for _ in 0..30 {
            let (next, stats) = st.step(&s).unwrap();
            let en = g.dot_w(&next.v1, &next.v1) + g.dot_w(&next.v2, &next.v2);
            assert!(en < e, "{en} >= {e}");
            assert!(stats.divergence <= 1e-11);
            assert!(next.boundary_violation(&g) == 0.0);
            assert!(stats.picard_iterations >= 1);
            e = en;
            s = next;
        }
    }

    #[test]
    fn cold_start_keeps_the_energy_inequality_for_large_data() {
        let gap = GapProfile {
            mean: 1.0,
            cos: vec![0.1],
            sin: vec![],
        };
        let g = build_grid(&ChannelGeometry::new(2.0, gap, 16, 8).unwrap()).unwrap();
        let xi = build_background(1.0, 0.5, &g, 0.1).unwrap();
        let fm = FrictionModel::new(0.05, 0.5, 1e-6).unwrap();
        let mut c = cfg(0.0015625);
        c.t_end = 2.0 * c.dt;
        let p = Projector::new(&g).unwrap();
        let v0 = crate::harness::random_initial(&g, &p, 31.25, 20, 1e-12).unwrap();
        let s = crate::solver::run(&v0, &c, &fm, &xi, &g, &mut []).unwrap();
        assert!(s.step_residuals.iter().all(|&r| r <= 0.0), "{:?}", s.step_residuals);
    }

    #[test]
    fn functional_step_matches_a_fresh_stepper() {
        let g = wavy(16, 8);
        let xi = build_background(1.0, 1.0, &g, 0.1).unwrap();
        let fm = FrictionModel::new(0.1, 0.3, 1e-6).unwrap();
        let s = random_state(&g, 5);
        let a = step(&s, &cfg(0.01), &fm, &xi, &g).unwrap();
        let b = Stepper::new(&g, &xi, &fm, &cfg(0.01)).unwrap().step(&s).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn history_switches_to_two_step_scheme() {
        let g = wavy(16, 8);
        let xi = build_background(1.0, 1.0, &g, 0.1).unwrap();
        let fm = FrictionModel::new(0.1, 0.3, 1e-6).unwrap();
        let s = random_state(&g, 7);
        let mut st = Stepper::new(&g, &xi, &fm, &cfg(0.01)).unwrap();
        assert!(st.history().is_none());
        let s1 = st.step(&s).unwrap().0;
        let h = st.history().cloned();
        assert!(h.is_some());
        let mut cold = st.clone();
        cold.set_history(None);
        let warm = st.step(&s1).unwrap().0;
        let fresh = cold.step(&s1).unwrap().0;
        assert!(warm.v1.iter().zip(&fresh.v1).any(|(a, b)| a != b));
        let mut again = st.clone();
        again.set_history(h);
        assert_eq!(again.step(&s1).unwrap().0, warm);
    }

    #[test]
    fn cfl_violation_is_reported_with_time() {
        let g = wavy(16, 8);
        let xi = build_background(10.0, 0.5, &g, 0.1).unwrap();
        let fm = FrictionModel::new(0.1, 0.3, 1e-6).unwrap();
        let mut st = Stepper::new(&g, &xi, &fm, &cfg(0.5)).unwrap();
        let err = st.step(&State::zeros(&g)).unwrap_err();
        match err {
            Error::Step { t, source } => {
                assert_eq!(t, 0.0);
                assert!(matches!(*source, Error::Cfl { .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn picard_budget_exhaustion_is_an_error() {
        let g = wavy(16, 8);
        let xi = build_background(1.0, 0.5, &g, 0.1).unwrap();
        let fm = FrictionModel::new(0.2, 0.1, 1e-6).unwrap();
        let mut c = cfg(0.01);
        c.picard_max = 1;
        let mut st = Stepper::new(&g, &xi, &fm, &c).unwrap();
        let err = st.step(&State::zeros(&g)).unwrap_err();
        assert_eq!(err.category(), "picard");
    }
}
