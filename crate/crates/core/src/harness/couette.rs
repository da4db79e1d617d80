//! Plane Couette validation against closed-form steady profiles.

use serde::Serialize;

use crate::background::build_background;
use crate::error::{Error, Result};
use crate::friction::{complementarity_residual, tangential_stress_physical, FrictionModel, WallTrace};
use crate::geometry::{build_grid, ChannelGeometry};
use crate::solver::{SolverConfig, State, Stepper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Stick,
    Slip,
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stick" => Ok(Regime::Stick),
            "slip" => Ok(Regime::Slip),
            other => Err(Error::Parameter {
                name: "regime",
                reason: format!("expected stick or slip, got `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouetteCase {
    pub n: usize,
    pub nu: f64,
    pub u0: f64,
    pub k: f64,
    pub delta: f64,
    pub eps_floor: f64,
    pub alpha: f64,
    /// `dt · U0 / min_spacing`; the CFL limit passed to the stepper is 25% above it.
    pub cfl: f64,
    /// Stop once `max|v^{n+1} − v^n| / dt` drops below this.
    pub steady_tol: f64,
    pub t_max: f64,
}

impl CouetteCase {
    pub fn standard(regime: Regime, n: usize) -> Self {
        let (k, delta) = match regime {
            Regime::Stick => (0.2, 0.1),
            Regime::Slip => (0.05, 0.05),
        };
        Self {
            n,
            nu: 0.1,
            u0: 1.0,
            k,
            delta,
            eps_floor: 1e-6,
            alpha: 1.0,
            cfl: 4.0,
            steady_tol: 1e-10,
            t_max: 400.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CouetteReport {
    pub case: CouetteCase,
    /// Max |u − u_T(1 − x2/h)| over the grid, `u_T` the Tresca bottom speed.
    pub error_tresca: f64,
    /// Max |u − u_b(1 − x2/h)| with `u_b` from the regularized wall balance.
    pub error_regularized: f64,
    pub u_bottom: f64,
    pub u_bottom_regularized: f64,
    pub u_bottom_tresca: f64,
    pub r_eq: f64,
    pub r_bound: f64,
    pub t_final: f64,
    pub steps: usize,
    pub steady_rate: f64,
}

/// Steady bottom speed under exact Tresca friction: `U0` if `ν U0 / h ≤ k`, else `k h / ν`.
pub fn tresca_bottom_speed(case: &CouetteCase, h: f64) -> f64 {
    let u = case.u0.abs().min(case.k * h / case.nu);
    u.copysign(case.u0)
}

/// Steady bottom speed of the regularized problem on a flat unit-gap channel.
///
/// Solves `k (w² + ε²)^((δ−1)/2) w = −ν (U0 + w) / h` for the wall slip `w = u_b − U0`.
pub fn regularized_bottom_speed(case: &CouetteCase, h: f64) -> f64 {
    let fm = FrictionModel {
        k: case.k,
        delta: case.delta,
        eps_floor: case.eps_floor,
    };
    let f = |w: f64| fm.g(w) + case.nu * (case.u0 + w) / h;
    let (mut lo, mut hi) = (-case.u0, 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    case.u0 + 0.5 * (lo + hi)
}

pub fn run_couette(case: &CouetteCase) -> Result<CouetteReport> {
    let geom = ChannelGeometry::flat(1.0, 1.0, case.n, case.n)?;
    let grid = build_grid(&geom)?;
    let xi = build_background(case.u0, case.alpha, &grid, case.nu)?;
    let fm = FrictionModel::new(case.k, case.delta, case.eps_floor)?;
    let dt = case.cfl * grid.min_spacing() / case.u0.abs().max(1e-12);
    let cfg = SolverConfig {
        nu: case.nu,
        dt,
        cfl: 1.25 * case.cfl,
        proj_tol: 1e-10,
        picard_tol: 1e-12,
        picard_max: 500,
        t_end: case.t_max,
        snapshot_dt: dt,
    };
    let mut stepper = Stepper::new(&grid, &xi, &fm, &cfg)?;
    let mut state = State::zeros(&grid);
    let mut steps = 0;
    let mut rate = f64::INFINITY;
    while state.t < case.t_max {
        let (next, _) = stepper.step(&state)?;
        rate = next
            .v1
            .iter()
            .zip(&state.v1)
            .chain(next.v2.iter().zip(&state.v2))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / dt;
        state = next;
        steps += 1;
        if rate <= case.steady_tol {
            break;
        }
    }
    if rate > case.steady_tol {
        return Err(Error::Analysis(format!(
            "Couette run did not reach steady state by t = {} (rate {rate:.3e})",
            case.t_max
        )));
    }
    let u_b_reg = regularized_bottom_speed(case, 1.0);
    let u_b_tresca = tresca_bottom_speed(case, 1.0);
    let mut err_t: f64 = 0.0;
    let mut err_r: f64 = 0.0;
    for i in 0..grid.nq {
        for j in 0..=grid.ns {
            let x2 = grid.x2(i, j);
            let u = xi.u[grid.idx(i, j)] + state.v1[grid.idx(i, j)];
            err_t = err_t.max((u - u_b_tresca * (1.0 - x2)).abs());
            err_r = err_r.max((u - u_b_reg * (1.0 - x2)).abs());
        }
    }
    let slip = WallTrace::new(grid.bottom_row(&state.v1));
    let u_bottom = slip.values.iter().map(|w| case.u0 + w).sum::<f64>() / grid.nq as f64;
    let stress = tangential_stress_physical(&state, &xi, &grid, case.nu)?;
    let (r_eq, r_bound) = complementarity_residual(&fm, &slip, &stress, &grid)?;
    Ok(CouetteReport {
        case: *case,
        error_tresca: err_t,
        error_regularized: err_r,
        u_bottom,
        u_bottom_regularized: u_b_reg,
        u_bottom_tresca: u_b_tresca,
        r_eq,
        r_bound,
        t_final: state.t,
        steps,
        steady_rate: rate,
    })
}

/// Observed orders `log2(e_k / e_{k+1})` of a refinement sequence.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
