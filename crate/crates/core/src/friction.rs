//! Tresca friction functional, its power-law regularization and wall-stress extraction.

use crate::background::BackgroundFlow;
use crate::error::{check_len, Error, Result};
use crate::geometry::MappedGrid;
use crate::solver::State;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FrictionModel {
    pub k: f64,
    pub delta: f64,
    pub eps_floor: f64,
}

impl FrictionModel {
    pub fn new(k: f64, delta: f64, eps_floor: f64) -> Result<Self> {
        let fm = Self { k, delta, eps_floor };
        fm.validate()?;
        Ok(fm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::Parameter {
                name: "k",
                reason: format!("must be non-negative, got {}", self.k),
            });
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Parameter {
                name: "delta",
                reason: format!("must lie in (0, 1], got {}", self.delta),
            });
        }
        if !(self.eps_floor > 0.0 && self.eps_floor.is_finite()) {
            return Err(Error::Parameter {
                name: "eps_floor",
                reason: format!("must be positive, got {}", self.eps_floor),
            });
        }
        Ok(())
    }

    /// Lagged Picard coefficient `k (w² + ε²)^((δ−1)/2)`.
    #[inline]
    pub fn coefficient(&self, w: f64) -> f64 {
        if self.delta == 1.0 {
            self.k
        } else {
            self.k * (w * w + self.eps_floor * self.eps_floor).powf(0.5 * (self.delta - 1.0))
        }
    }

    /// Smoothed derivative density `g(w) = coefficient(w) · w`.
    #[inline]
    pub fn g(&self, w: f64) -> f64 {
        self.coefficient(w) * w
    }
}

/// Tangential samples on the bottom wall.
#[derive(Debug, Clone, PartialEq)]
pub struct WallTrace {
    pub values: Vec<f64>,
}

impl WallTrace {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `j(u) = ∫Γ0 k |u| dx1`.
pub fn j_exact(fm: &FrictionModel, trace: &WallTrace, grid: &MappedGrid) -> Result<f64> {
    let abs: Vec<f64> = trace.values.iter().map(|v| v.abs()).collect();
    Ok(fm.k * grid.integrate_gamma0(&abs)?)
}

/// `j_δ(u) = k/(1+δ) ∫Γ0 |u|^(1+δ) dx1`.
pub fn j_delta(fm: &FrictionModel, trace: &WallTrace, grid: &MappedGrid) -> Result<f64> {
    let p = 1.0 + fm.delta;
    let pow: Vec<f64> = trace.values.iter().map(|v| v.abs().powf(p)).collect();
    Ok(fm.k / p * grid.integrate_gamma0(&pow)?)
}

pub fn j_delta_prime(fm: &FrictionModel, trace: &WallTrace) -> WallTrace {
    WallTrace::new(trace.values.iter().map(|&w| fm.g(w)).collect())
}

fn one_sided_stress(f: &[f64], grid: &MappedGrid, nu: f64) -> Result<WallTrace> {
    if grid.ns < 3 {
        return Err(Error::Geometry(format!(
            "stress stencil needs three layers, grid has Ns = {}",
            grid.ns
        )));
    }
    check_len(grid.n_nodes(), f.len())?;
    let values = (0..grid.nq)
        .map(|i| {
            let (f0, f1, f2) = (f[grid.idx(i, 0)], f[grid.idx(i, 1)], f[grid.idx(i, 2)]);
            let ds_dx2 = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * grid.ds * grid.h[i]);
            -nu * ds_dx2
        })
        .collect();
    Ok(WallTrace::new(values))
}

/// Tangential stress `σ_η = −ν ∂v1/∂x2` on Γ0 (outward normal `−e2`).
pub fn tangential_stress(state: &State, grid: &MappedGrid, nu: f64) -> Result<WallTrace> {
    one_sided_stress(&state.v1, grid, nu)
}

/// Stress of the physical velocity `U + v1`; exact for profiles linear in `x2`.
pub fn tangential_stress_physical(
    state: &State,
    xi: &BackgroundFlow,
    grid: &MappedGrid,
    nu: f64,
) -> Result<WallTrace> {
    check_len(grid.n_nodes(), xi.u.len())?;
    let u: Vec<f64> = state.v1.iter().zip(&xi.u).map(|(v, b)| v + b).collect();
    one_sided_stress(&u, grid, nu)
}

/// Pointwise `|k|slip| + stress·slip|`.
pub fn complementarity_density(fm: &FrictionModel, slip: &WallTrace, stress: &WallTrace) -> Vec<f64> {
    slip.values
        .iter()
        .zip(&stress.values)
        .map(|(s, t)| (fm.k * s.abs() + t * s).abs())
        .collect()
}

/// `(r_eq, r_bound)` for the Tresca branch conditions.
pub fn complementarity_residual(
    fm: &FrictionModel,
    slip: &WallTrace,
    stress: &WallTrace,
    grid: &MappedGrid,
) -> Result<(f64, f64)> {
    check_len(slip.len(), stress.len())?;
    let r_eq = grid.integrate_gamma0(&complementarity_density(fm, slip, stress))?;
    let r_bound = (stress.max_abs() - fm.k).max(0.0);
    Ok((r_eq, r_bound))
}
