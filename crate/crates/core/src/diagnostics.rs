//! Norms, energy monitoring and sampled functional-inequality constants.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::background::BackgroundFlow;
use crate::error::{Error, Result};
use crate::friction::{
    complementarity_density, complementarity_residual, j_delta, tangential_stress_physical, FrictionModel,
    WallTrace,
};
use crate::geometry::MappedGrid;
use crate::linalg::{folded_position, BandedSpd};
use crate::sampling::random_admissible;
use crate::solver::{Projector, State, Stiffness};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub h_norm_sq: f64,
    pub v_norm_sq: f64,
    pub l4_norm: f64,
    /// Regularized friction `j_δ(v)`.
    pub j_value: f64,
    /// Residual of the step ending at `t`; NaN for the first record of a run.
    pub energy_residual: f64,
    pub slip_max: f64,
    pub stress_max: f64,
    pub comp_residual: f64,
}

impl EnergyRecord {
    pub const CSV_HEADER: &'static str =
        "t,h_norm_sq,v_norm_sq,l4_norm,j_value,energy_residual,slip_max,stress_max,comp_residual";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.t,
            self.h_norm_sq,
            self.v_norm_sq,
            self.l4_norm,
            self.j_value,
            self.energy_residual,
            self.slip_max,
            self.stress_max,
            self.comp_residual
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsEstimate {
    pub lambda1: f64,
    pub c_lady: f64,
    pub hopf_ratio: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

fn l4(grid: &MappedGrid, v1: &[f64], v2: &[f64]) -> f64 {
    let q: f64 = (0..v1.len())
        .map(|n| {
            let s = v1[n] * v1[n] + v2[n] * v2[n];
            grid.weights[n] * s * s
        })
        .sum();
    q.powf(0.25)
}

pub fn norms_with(grid: &MappedGrid, k: &Stiffness, v1: &[f64], v2: &[f64]) -> (f64, f64, f64) {
    let h = grid.dot_w(v1, v1) + grid.dot_w(v2, v2);
    let v = k.form(v1, v1) + k.form(v2, v2);
    (h, v, l4(grid, v1, v2))
}

/// `(|v|², ‖v‖², ‖v‖_L⁴)`.
pub fn compute_norms(state: &State, grid: &MappedGrid) -> Result<(f64, f64, f64)> {
    state.check_shape(grid)?;
    Ok(norms_with(grid, &Stiffness::new(grid), &state.v1, &state.v2))
}

/// Snapshot record together with the wall traces it summarizes.
pub fn energy_record(
    state: &State,
    grid: &MappedGrid,
    k: &Stiffness,
    fm: &FrictionModel,
    xi: &BackgroundFlow,
    nu: f64,
    residual: f64,
) -> Result<(EnergyRecord, WallTrace, WallTrace, Vec<f64>)> {
    let (h, v, l) = norms_with(grid, k, &state.v1, &state.v2);
    let slip = WallTrace::new(grid.bottom_row(&state.v1));
    let stress = tangential_stress_physical(state, xi, grid, nu)?;
    let comp = complementarity_density(fm, &slip, &stress);
    let (r_eq, _) = complementarity_residual(fm, &slip, &stress, grid)?;
    let rec = EnergyRecord {
        t: state.t,
        h_norm_sq: h,
        v_norm_sq: v,
        l4_norm: l,
        j_value: j_delta(fm, &slip, grid)?,
        energy_residual: residual,
        slip_max: slip.max_abs(),
        stress_max: stress.max_abs(),
        comp_residual: r_eq,
    };
    Ok((rec, slip, stress, comp))
}

/// `Δ|v|²/dt + ν·avg‖v‖² + 2·avg j − F` from `(|v|², ‖v‖², j)` triples.
pub fn energy_residual_values(prev: (f64, f64, f64), next: (f64, f64, f64), dt: f64, nu: f64, f: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Parameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    Ok((next.0 - prev.0) / dt + 0.5 * nu * (prev.1 + next.1) + (prev.2 + next.2) - f)
}

pub fn energy_residual(prev: &EnergyRecord, next: &EnergyRecord, dt: f64, nu: f64, f: f64) -> Result<f64> {
    energy_residual_values(
        (prev.h_norm_sq, prev.v_norm_sq, prev.j_value),
        (next.h_norm_sq, next.v_norm_sq, next.j_value),
        dt,
        nu,
        f,
    )
}

/// Energy tolerance `c·(dt + dx²)·scale`.
pub fn energy_tolerance(c: f64, dt: f64, dx: f64, scale: f64) -> f64 {
    c * (dt + dx * dx) * scale
}

/// Dirichlet-form factors on the admissible degrees of freedom.
#[derive(Debug, Clone)]
pub struct FreeLaplacian {
    nq: usize,
    ns: usize,
    k1: BandedSpd,
    k2: BandedSpd,
}

impl FreeLaplacian {
    pub fn new(grid: &MappedGrid, k: &Stiffness) -> Result<Self> {
        let (nq, ns) = (grid.nq, grid.ns);
        let mut k1 = BandedSpd::zeros(nq * ns, nq + 2);
        let mut k2 = BandedSpd::zeros(nq * (ns - 1), nq + 2);
        k.for_each_entry(|r, c, v| {
            let (ir, jr, ic, jc) = (r / (ns + 1), r % (ns + 1), c / (ns + 1), c % (ns + 1));
            let (pr, pc) = (folded_position(ir, nq), folded_position(ic, nq));
            if jr < ns && jc < ns {
                let (a, b) = (jr * nq + pr, jc * nq + pc);
                if a >= b {
                    k1.add(a, b, v);
                }
            }
            if jr > 0 && jr < ns && jc > 0 && jc < ns {
                let (a, b) = ((jr - 1) * nq + pr, (jc - 1) * nq + pc);
                if a >= b {
                    k2.add(a, b, v);
                }
            }
        });
        k1.factor()?;
        k2.factor()?;
        Ok(Self { nq, ns, k1, k2 })
    }

    pub fn solve(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nq, ns) = (self.nq, self.ns);
        let idx = |i: usize, j: usize| i * (ns + 1) + j;
        let mut x1 = vec![0.0; nq * ns];
        let mut x2 = vec![0.0; nq * (ns - 1)];
        for i in 0..nq {
            let p = folded_position(i, nq);
            for j in 0..ns {
                x1[j * nq + p] = r1[idx(i, j)];
                if j > 0 {
                    x2[(j - 1) * nq + p] = r2[idx(i, j)];
                }
            }
        }
        self.k1.solve_in_place(&mut x1);
        self.k2.solve_in_place(&mut x2);
        let mut o1 = vec![0.0; r1.len()];
        let mut o2 = vec![0.0; r2.len()];
        for i in 0..nq {
            let p = folded_position(i, nq);
            for j in 0..ns {
                o1[idx(i, j)] = x1[j * nq + p];
                if j > 0 {
                    o2[idx(i, j)] = x2[(j - 1) * nq + p];
                }
            }
        }
        (o1, o2)
    }
}

#[derive(Debug, Clone)]
pub struct PoincareEstimate {
    pub lambda1: f64,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub iterations: usize,
}

const EIGEN_MAX_ITER: usize = 400;
const EIGEN_TOL: f64 = 1e-8;

/// Smallest eigenvalue of the Dirichlet form on admissible divergence-free fields.
///
/// Projected, preconditioned block iteration: each search direction is the
/// projected inverse-Laplacian residual, with a three-vector Rayleigh–Ritz step.
pub fn estimate_poincare(grid: &MappedGrid) -> Result<PoincareEstimate> {
    let projector = Projector::new(grid)?;
    estimate_poincare_with(grid, &projector)
}

pub fn estimate_poincare_with(grid: &MappedGrid, projector: &Projector) -> Result<PoincareEstimate> {
    let k = Stiffness::new(grid);
    let lap = FreeLaplacian::new(grid, &k)?;
    let mask = |v1: &mut Vec<f64>, v2: &mut Vec<f64>| crate::solver::apply_bc(grid, v1, v2);
    let project = |v1: &[f64], v2: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let p = projector.project(grid, v1, v2, 1e-12)?;
        Ok((p.v1, p.v2))
    };
    let mdot = |a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)| grid.dot_w(&a.0, &b.0) + grid.dot_w(&a.1, &b.1);
    let kapply = |a: &(Vec<f64>, Vec<f64>)| -> (Vec<f64>, Vec<f64>) {
        let (mut x, mut y) = (k.apply(&a.0), k.apply(&a.1));
        mask(&mut x, &mut y);
        (x, y)
    };
    let kdot = |a: &(Vec<f64>, Vec<f64>), ka: &(Vec<f64>, Vec<f64>)| -> f64 {
        a.0.iter().zip(&ka.0).chain(a.1.iter().zip(&ka.1)).map(|(x, y)| x * y).sum()
    };

    let seed1 = grid.field_from_fn(|x1, x2| {
        let s = x2 / grid.geom.gap.value(x1, grid.period());
        (0.5 * std::f64::consts::PI * s).cos() * (1.0 + 0.1 * (2.0 * std::f64::consts::PI * x1 / grid.period()).cos())
    });
    let seed2 = grid.field_from_fn(|x1, x2| {
        let s = x2 / grid.geom.gap.value(x1, grid.period());
        (std::f64::consts::PI * s).sin() * 0.1 * (2.0 * std::f64::consts::PI * x1 / grid.period()).sin()
    });
    let mut x = project(&seed1, &seed2)?;
    let norm = mdot(&x, &x).sqrt();
    x.0.iter_mut().chain(x.1.iter_mut()).for_each(|v| *v /= norm);
    let mut kx = kapply(&x);
    let mut lambda = kdot(&x, &kx);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for it in 1..=EIGEN_MAX_ITER {
        let r1: Vec<f64> = (0..kx.0.len()).map(|m| kx.0[m] - lambda * grid.weights[m] * x.0[m]).collect();
        let r2: Vec<f64> = (0..kx.1.len()).map(|m| kx.1[m] - lambda * grid.weights[m] * x.1[m]).collect();
        let (mut w1, mut w2) = lap.solve(&r1, &r2);
        mask(&mut w1, &mut w2);
        let w = project(&w1, &w2)?;

        let mut basis: Vec<(Vec<f64>, Vec<f64>)> = vec![x.clone()];
        for cand in [Some(w), prev.clone()].into_iter().flatten() {
            let mut c = cand;
            for b in &basis {
                let proj = mdot(&c, b);
                for m in 0..c.0.len() {
                    c.0[m] -= proj * b.0[m];
                    c.1[m] -= proj * b.1[m];
                }
            }
            let nrm = mdot(&c, &c).sqrt();
            if nrm > 1e-12 {
                c.0.iter_mut().chain(c.1.iter_mut()).for_each(|v| *v /= nrm);
                basis.push(c);
            }
        }
        let kb: Vec<_> = basis.iter().map(&kapply).collect();
        let dim = basis.len();
        let mut a = Matrix3::<f64>::identity() * 1e300;
        for p in 0..dim {
            for q in 0..dim {
                a[(p, q)] = 0.5 * (kdot(&basis[p], &kb[q]) + kdot(&basis[q], &kb[p]));
            }
        }
        let sub = a.view((0, 0), (dim, dim)).into_owned();
        let eig = SymmetricEigen::new(sub);
        let (mut best, mut at) = (f64::INFINITY, 0);
        for (p, &e) in eig.eigenvalues.iter().enumerate() {
            if e < best {
                best = e;
                at = p;
            }
        }
        let y = eig.eigenvectors.column(at);
        let mut nx = (vec![0.0; x.0.len()], vec![0.0; x.1.len()]);
        let mut np = (vec![0.0; x.0.len()], vec![0.0; x.1.len()]);
        for p in 0..dim {
            for m in 0..nx.0.len() {
                nx.0[m] += y[p] * basis[p].0[m];
                nx.1[m] += y[p] * basis[p].1[m];
                if p > 0 {
                    np.0[m] += y[p] * basis[p].0[m];
                    np.1[m] += y[p] * basis[p].1[m];
                }
            }
        }
        let nrm = mdot(&nx, &nx).sqrt();
        nx.0.iter_mut().chain(nx.1.iter_mut()).for_each(|v| *v /= nrm);
        x = nx;
        kx = kapply(&x);
        let new_lambda = kdot(&x, &kx) / mdot(&x, &x);
        let change = (new_lambda - lambda).abs() / new_lambda.abs();
        lambda = new_lambda;
        prev = Some(np);
        if change <= EIGEN_TOL && it > 1 {
            return Ok(PoincareEstimate {
                lambda1: lambda,
                v1: x.0,
                v2: x.1,
                iterations: it,
            });
        }
    }
    Err(Error::Eigen {
        iterations: EIGEN_MAX_ITER,
        rayleigh: lambda,
    })
}

/// `‖v‖_L⁴ / (|v|^½ ‖v‖^½)`, or `None` for a degenerate field.
pub fn ladyzhenskaya_ratio(grid: &MappedGrid, k: &Stiffness, v1: &[f64], v2: &[f64]) -> Option<f64> {
    let (h, v, l) = norms_with(grid, k, v1, v2);
    if h > 0.0 && v > 0.0 {
        Some(l / (h.sqrt() * v.sqrt()).sqrt())
    } else {
        None
    }
}

#[derive(Debug, Clone)]
pub struct LadyzhenskayaEstimate {
    pub c_lady: f64,
    pub samples: Vec<f64>,
}

pub fn estimate_ladyzhenskaya(grid: &MappedGrid, n_samples: usize, seed: u64) -> Result<LadyzhenskayaEstimate> {
    let projector = Projector::new(grid)?;
    estimate_ladyzhenskaya_with(grid, &projector, n_samples, seed)
}

pub fn estimate_ladyzhenskaya_with(
    grid: &MappedGrid,
    projector: &Projector,
    n_samples: usize,
    seed: u64,
) -> Result<LadyzhenskayaEstimate> {
    if n_samples < 1000 {
        return Err(Error::Parameter {
            name: "n_samples",
            reason: format!("at least 1000 samples required, got {n_samples}"),
        });
    }
    sample_ladyzhenskaya(grid, projector, n_samples, seed)
}

/// Sampled Ladyzhenskaya ratios without the sample-count floor (hold-out checks).
pub fn sample_ladyzhenskaya(
    grid: &MappedGrid,
    projector: &Projector,
    n_samples: usize,
    seed: u64,
) -> Result<LadyzhenskayaEstimate> {
    let k = Stiffness::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let (v1, v2) = random_admissible(grid, projector, &mut rng, 1e-12)?;
        if let Some(r) = ladyzhenskaya_ratio(grid, &k, &v1, &v2) {
            samples.push(r);
        }
    }
    if samples.is_empty() {
        return Err(Error::DegenerateSamples);
    }
    let c_lady = samples.iter().cloned().fold(0.0, f64::max);
    Ok(LadyzhenskayaEstimate { c_lady, samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsorbingReport {
    /// `max_t |v(t)|² − (|v(0)|² e^{−νλ1 t} + F/(νλ1))`.
    pub margin: f64,
    /// `max_t |v(t)|² / (|v(0)|² e^{−νλ1 t} + F/(νλ1))`.
    pub max_ratio: f64,
    /// `F/(νλ1)`.
    pub ball: f64,
    /// `ρ² = 2F/(νλ1)`.
    pub rho_sq: f64,
    /// First record time (relative to the series start) with `|v|² ≤ ρ²`.
    pub entry_time: Option<f64>,
}

pub fn absorbing_check(series: &[EnergyRecord], lambda1: f64, f: f64, nu: f64) -> Result<AbsorbingReport> {
    let first = series
        .first()
        .ok_or_else(|| Error::Analysis("absorbing check needs a non-empty series".into()))?;
    let rate = nu * lambda1;
    let ball = f / rate;
    let rho_sq = 2.0 * ball;
    let mut margin = f64::NEG_INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut entry_time = None;
    for r in series {
        let t = r.t - first.t;
        let bound = first.h_norm_sq * (-rate * t).exp() + ball;
        margin = margin.max(r.h_norm_sq - bound);
        max_ratio = max_ratio.max(r.h_norm_sq / bound);
        if entry_time.is_none() && r.h_norm_sq <= rho_sq {
            entry_time = Some(t);
        }
    }
    Ok(AbsorbingReport {
        margin,
        max_ratio,
        ball,
        rho_sq,
        entry_time,
    })
}
