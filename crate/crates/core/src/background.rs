//! Background shear profile `ξ = U(x2) e1` lifting the wall speed into the domain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::MappedGrid;
use crate::sampling::random_admissible;
use crate::solver::{a_form, b_skew, Projector};

/// Quintic bump `φ(r) = 1 − 10r³ + 15r⁴ − 6r⁵` on `[0, 1]`, zero beyond.
pub fn bump(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        1.0 - r * r * r * (10.0 - 15.0 * r + 6.0 * r * r)
    }
}

pub fn bump_prime(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        let m = 1.0 - r;
        -30.0 * r * r * m * m
    }
}

pub fn bump_second(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        -60.0 * r * (1.0 - r) * (1.0 - 2.0 * r)
    }
}

#[derive(Debug, Clone)]
pub struct BackgroundFlow {
    pub u0: f64,
    pub alpha: f64,
    /// Support thickness `alpha · h_min`.
    pub layer: f64,
    pub nu: f64,
    /// `U` on every node.
    pub u: Vec<f64>,
    /// `U,x2` on every node.
    pub du: Vec<f64>,
    /// `U,x2x2` on every node.
    pub ddu: Vec<f64>,
    /// `2ν‖ξ‖²`.
    pub forcing_bound: f64,
}

impl BackgroundFlow {
    pub fn profile(&self, x2: f64) -> f64 {
        self.u0 * bump(x2 / self.layer)
    }

    pub fn profile_prime(&self, x2: f64) -> f64 {
        self.u0 * bump_prime(x2 / self.layer) / self.layer
    }

    pub fn profile_second(&self, x2: f64) -> f64 {
        self.u0 * bump_second(x2 / self.layer) / (self.layer * self.layer)
    }

    pub fn is_zero(&self) -> bool {
        self.u0 == 0.0
    }
}

pub fn build_background(u0: f64, alpha: f64, grid: &MappedGrid, nu: f64) -> Result<BackgroundFlow> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter {
            name: "alpha",
            reason: format!("must lie in (0, 1], got {alpha}"),
        });
    }
    if !(nu > 0.0) {
        return Err(Error::Parameter {
            name: "nu",
            reason: format!("must be positive, got {nu}"),
        });
    }
    if !u0.is_finite() {
        return Err(Error::Parameter {
            name: "U0",
            reason: "must be finite".into(),
        });
    }
    let h_min = grid.h.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_max = grid.h.iter().cloned().fold(0.0, f64::max);
    let layer = alpha * h_min;
    let min = 3.0 * grid.ds * h_max;
    if layer < min {
        return Err(Error::BackgroundUnderResolved { layer, min });
    }
    let mut xi = BackgroundFlow {
        u0,
        alpha,
        layer,
        nu,
        u: Vec::new(),
        du: Vec::new(),
        ddu: Vec::new(),
        forcing_bound: 0.0,
    };
    xi.u = grid.field_from_fn(|_, x2| xi.profile(x2));
    xi.du = grid.field_from_fn(|_, x2| xi.profile_prime(x2));
    xi.ddu = grid.field_from_fn(|_, x2| xi.profile_second(x2));
    let grad_sq: Vec<f64> = xi.du.iter().map(|d| d * d).collect();
    xi.forcing_bound = 2.0 * nu * grid.integrate_domain(&grad_sq)?;
    Ok(xi)
}

/// `(|ξ|², ‖ξ‖², F)` with `F = 2ν‖ξ‖²`.
pub fn background_norms(xi: &BackgroundFlow, grid: &MappedGrid) -> Result<(f64, f64, f64)> {
    let sq: Vec<f64> = xi.u.iter().map(|v| v * v).collect();
    let grad_sq: Vec<f64> = xi.du.iter().map(|d| d * d).collect();
    let h = grid.integrate_domain(&sq)?;
    let v = grid.integrate_domain(&grad_sq)?;
    Ok((h, v, 2.0 * xi.nu * v))
}

/// Full H¹ norm squared, `|ξ|² + ‖ξ‖²`.
pub fn h1_norm_sq(xi: &BackgroundFlow, grid: &MappedGrid) -> Result<f64> {
    let (h, v, _) = background_norms(xi, grid)?;
    Ok(h + v)
}

/// Sampled supremum of `|b(v, ξ, v)| / ‖v‖²` over random divergence-free fields.
#[derive(Debug, Clone)]
pub struct HopfEstimate {
    pub ratio: f64,
    /// Per-sample ratios in draw order; degenerate draws are omitted.
    pub samples: Vec<f64>,
}

pub fn hopf_ratio_estimate(
    xi: &BackgroundFlow,
    grid: &MappedGrid,
    n_samples: usize,
    seed: u64,
) -> Result<HopfEstimate> {
    let projector = Projector::new(grid)?;
    hopf_ratio_with(xi, grid, &projector, n_samples, seed)
}

pub fn hopf_ratio_with(
    xi: &BackgroundFlow,
    grid: &MappedGrid,
    projector: &Projector,
    n_samples: usize,
    seed: u64,
) -> Result<HopfEstimate> {
    if n_samples < 100 {
        return Err(Error::Parameter {
            name: "n_samples",
            reason: format!("at least 100 samples required, got {n_samples}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = vec![0.0; grid.n_nodes()];
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let (v1, v2) = random_admissible(grid, projector, &mut rng, 1e-12)?;
        let energy = a_form((&v1, &v2), (&v1, &v2), grid)?;
        if !(energy > 0.0) {
            continue;
        }
        let b = b_skew((&v1, &v2), (&xi.u, &zero), (&v1, &v2), grid)?;
        samples.push(b.abs() / energy);
    }
    if samples.is_empty() {
        return Err(Error::DegenerateSamples);
    }
    let ratio = samples.iter().cloned().fold(0.0, f64::max);
    Ok(HopfEstimate { ratio, samples })
}

/// Layer fractions probed by the `constants` report.
pub const ALPHA_LADDER: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];
