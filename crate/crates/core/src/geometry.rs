//! Periodic channel `0 < x1 < L`, `0 < x2 < h(x1)` and its terrain-following grid.
//!
//! The grid lives in mapped coordinates `q = x1`, `s = x2 / h(x1) ∈ [0, 1]`.
//! Nodes are `(q_i, s_j)` with `i = 0..nq` (periodic, node `nq` is node `0`) and
//! `j = 0..=ns`; row `j = 0` is the driven bottom wall Γ0 and row `j = ns` the
//! fixed top wall Γ1. Node fields are stored row-major as `i * (ns + 1) + j`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Gap function stored as a truncated trigonometric series,
/// `h(x) = mean + Σ_k cos[k-1]·cos(2πkx/L) + sin[k-1]·sin(2πkx/L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl GapProfile {
    pub fn constant(mean: f64) -> Self {
        Self {
            mean,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    /// Highest wavenumber with a nonzero coefficient (0 for a flat gap).
    pub fn highest_mode(&self) -> usize {
        let last = |c: &[f64]| c.iter().rposition(|&a| a != 0.0).map_or(0, |k| k + 1);
        last(&self.cos).max(last(&self.sin))
    }

    pub fn value(&self, x: f64, period: f64) -> f64 {
        let mut h = self.mean;
        for (k, &c) in self.cos.iter().enumerate() {
            h += c * (2.0 * PI * (k + 1) as f64 * x / period).cos();
        }
        for (k, &s) in self.sin.iter().enumerate() {
            h += s * (2.0 * PI * (k + 1) as f64 * x / period).sin();
        }
        h
    }

    pub fn derivative(&self, x: f64, period: f64) -> f64 {
        let mut dh = 0.0;
        for (k, &c) in self.cos.iter().enumerate() {
            let w = 2.0 * PI * (k + 1) as f64 / period;
            dh -= c * w * (w * x).sin();
        }
        for (k, &s) in self.sin.iter().enumerate() {
            let w = 2.0 * PI * (k + 1) as f64 / period;
            dh += s * w * (w * x).cos();
        }
        dh
    }
}

/// Channel geometry: period, gap profile and resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    pub period: f64,
    pub gap: GapProfile,
    pub nq: usize,
    pub ns: usize,
}

impl ChannelGeometry {
    pub fn new(period: f64, gap: GapProfile, nq: usize, ns: usize) -> Result<Self> {
        let geom = Self { period, gap, nq, ns };
        geom.validate()?;
        Ok(geom)
    }

    /// Flat channel of height `height`.
    pub fn flat(period: f64, height: f64, nq: usize, ns: usize) -> Result<Self> {
        Self::new(period, GapProfile::constant(height), nq, ns)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(Error::Geometry(format!("period L = {} must be positive", self.period)));
        }
        if self.nq < 8 || self.ns < 8 {
            return Err(Error::Geometry(format!(
                "resolution Nq = {}, Ns = {} must both be at least 8",
                self.nq, self.ns
            )));
        }
        let mode = self.gap.highest_mode();
        if self.nq < 8 * mode {
            return Err(Error::Geometry(format!(
                "Nq = {} under-resolves gap mode {} (need Nq >= {})",
                self.nq,
                mode,
                8 * mode
            )));
        }
        Ok(())
    }

    /// Samples of `(x1, h(x1))` on a 4x oversampled periodic grid.
    fn oversampled(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = 4 * self.nq;
        (0..n).map(move |m| {
            let x = self.period * m as f64 / n as f64;
            (x, self.gap.value(x, self.period))
        })
    }

    pub fn min_gap(&self) -> f64 {
        self.oversampled().map(|(_, h)| h).fold(f64::INFINITY, f64::min)
    }

    pub fn max_gap(&self) -> f64 {
        self.oversampled().map(|(_, h)| h).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Discrete grid over the mapped rectangle, with analytic gap data per column.
#[derive(Debug, Clone)]
pub struct MappedGrid {
    pub geom: ChannelGeometry,
    pub nq: usize,
    pub ns: usize,
    pub dq: f64,
    pub ds: f64,
    /// `h(q_i)` per column.
    pub h: Vec<f64>,
    /// `h'(q_i)` per column.
    pub dh: Vec<f64>,
    /// Trapezoid quadrature weight (Jacobian included) per node.
    pub weights: Vec<f64>,
}

/// Build the mapped grid, rejecting any non-positive gap sample.
pub fn build_grid(geom: &ChannelGeometry) -> Result<MappedGrid> {
    geom.validate()?;
    for (x1, h) in geom.oversampled() {
        if !(h > 0.0) {
            return Err(Error::NonPositiveGap { x1, h });
        }
    }
    let nq = geom.nq;
    let ns = geom.ns;
    let dq = geom.period / nq as f64;
    let ds = 1.0 / ns as f64;
    let q: Vec<f64> = (0..nq).map(|i| i as f64 * dq).collect();
    let h: Vec<f64> = q.iter().map(|&x| geom.gap.value(x, geom.period)).collect();
    let dh: Vec<f64> = q.iter().map(|&x| geom.gap.derivative(x, geom.period)).collect();
    let mut weights = vec![0.0; nq * (ns + 1)];
    for i in 0..nq {
        for j in 0..=ns {
            let end = if j == 0 || j == ns { 0.5 } else { 1.0 };
            weights[i * (ns + 1) + j] = h[i] * dq * ds * end;
        }
    }
    Ok(MappedGrid {
        geom: geom.clone(),
        nq,
        ns,
        dq,
        ds,
        h,
        dh,
        weights,
    })
}

impl MappedGrid {
    pub fn new(geom: &ChannelGeometry) -> Result<Self> {
        build_grid(geom)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.ns + 1) + j
    }

    pub fn n_nodes(&self) -> usize {
        self.nq * (self.ns + 1)
    }

    pub fn period(&self) -> f64 {
        self.geom.period
    }

    #[inline]
    pub fn x1(&self, i: usize) -> f64 {
        i as f64 * self.dq
    }

    #[inline]
    pub fn s(&self, j: usize) -> f64 {
        j as f64 * self.ds
    }

    #[inline]
    pub fn x2(&self, i: usize, j: usize) -> f64 {
        self.s(j) * self.h[i]
    }

    /// Metric Jacobian `h(q_i)·dq·ds` of node `(i, j)`.
    pub fn jacobian(&self, i: usize, _j: usize) -> f64 {
        self.h[i] * self.dq * self.ds
    }

    /// Smallest physical spacing over the grid.
    pub fn min_spacing(&self) -> f64 {
        let hmin = self.h.iter().cloned().fold(f64::INFINITY, f64::min);
        self.dq.min(self.ds * hmin)
    }

    /// Evaluate `f(x1, x2)` on every node.
    pub fn field_from_fn(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        for i in 0..self.nq {
            for j in 0..=self.ns {
                out[self.idx(i, j)] = f(self.x1(i), self.x2(i, j));
            }
        }
        out
    }

    /// Bottom row (s = 0) of a node field.
    pub fn bottom_row(&self, f: &[f64]) -> Vec<f64> {
        (0..self.nq).map(|i| f[self.idx(i, 0)]).collect()
    }

    /// Trapezoid quadrature over Ω with Jacobian weights.
    pub fn integrate_domain(&self, f: &[f64]) -> Result<f64> {
        check_len(self.n_nodes(), f.len())?;
        Ok(self.weights.iter().zip(f).map(|(w, v)| w * v).sum())
    }

    /// Periodic trapezoid rule over the flat bottom Γ0.
    pub fn integrate_gamma0(&self, g: &[f64]) -> Result<f64> {
        check_len(self.nq, g.len())?;
        Ok(self.dq * g.iter().sum::<f64>())
    }

    /// Weighted inner product of two node fields.
    pub(crate) fn dot_w(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }
}

/// Convenience wrappers mirroring the quadrature operations.
pub fn integrate_domain(grid: &MappedGrid, f: &[f64]) -> Result<f64> {
    grid.integrate_domain(f)
}

pub fn integrate_gamma0(grid: &MappedGrid, g: &[f64]) -> Result<f64> {
    grid.integrate_gamma0(g)
}
