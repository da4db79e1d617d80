//! Mass-orthogonal projection onto discretely divergence-free admissible fields.

use crate::error::{Error, Result};
use crate::geometry::MappedGrid;
use crate::linalg::{folded_position, max_abs, BandedSpd};

use super::ops::{apply_bc, divergence, grad1, grad1_t, grad2, grad2_t, grad_rows, v1_free, v2_free};

const MAX_PCG: usize = 50;

/// Factored pressure operator `Σ_k Gr_kᵀ M Π_k Gr_k` with its kernel pinned.
#[derive(Debug, Clone)]
pub struct Projector {
    nq: usize,
    ns: usize,
    pinned: Vec<usize>,
    factor: BandedSpd,
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    /// Potential with zero weighted mean.
    pub phi: Vec<f64>,
    pub iterations: usize,
    pub divergence: f64,
}

impl Projector {
    pub fn new(grid: &MappedGrid) -> Result<Self> {
        let (nq, ns) = (grid.nq, grid.ns);
        let pos = |node: usize| {
            let (i, j) = (node / (ns + 1), node % (ns + 1));
            j * nq + folded_position(i, nq)
        };
        let mut pinned = vec![grid.idx(0, 0), grid.idx(0, 1)];
        if nq % 2 == 0 {
            pinned.push(grid.idx(1, 0));
            pinned.push(grid.idx(1, 1));
        }
        let is_pinned = |n: usize| pinned.contains(&n);
        let mut a = BandedSpd::zeros(grid.n_nodes(), 2 * nq + 4);
        for i in 0..nq {
            for j in 0..=ns {
                let w = grid.weights[grid.idx(i, j)];
                let (r1, r2) = grad_rows(grid, i, j);
                for (row, free) in [(r1, v1_free(j, ns)), (r2, v2_free(j, ns))] {
                    if !free {
                        continue;
                    }
                    for &(a_node, ca) in &row {
                        for &(b_node, cb) in &row {
                            if is_pinned(a_node) || is_pinned(b_node) {
                                continue;
                            }
                            let (pa, pb) = (pos(a_node), pos(b_node));
                            if pa >= pb {
                                a.add(pa, pb, w * ca * cb);
                            }
                        }
                    }
                }
            }
        }
        for &n in &pinned {
            a.add(pos(n), pos(n), 1.0);
        }
        a.factor()?;
        Ok(Self {
            nq,
            ns,
            pinned,
            factor: a,
        })
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let (nq, ns) = (self.nq, self.ns);
        let mut x = vec![0.0; r.len()];
        for i in 0..nq {
            for j in 0..=ns {
                x[j * nq + folded_position(i, nq)] = r[i * (ns + 1) + j];
            }
        }
        for &n in &self.pinned {
            let (i, j) = (n / (ns + 1), n % (ns + 1));
            x[j * nq + folded_position(i, nq)] = 0.0;
        }
        self.factor.solve_in_place(&mut x);
        let mut out = vec![0.0; r.len()];
        for i in 0..nq {
            for j in 0..=ns {
                out[i * (ns + 1) + j] = x[j * nq + folded_position(i, nq)];
            }
        }
        out
    }

    fn apply_operator(grid: &MappedGrid, phi: &[f64]) -> Vec<f64> {
        let (mut g1, mut g2) = (grad1(grid, phi), grad2(grid, phi));
        apply_bc(grid, &mut g1, &mut g2);
        for (n, w) in grid.weights.iter().enumerate() {
            g1[n] *= w;
            g2[n] *= w;
        }
        let a = grad1_t(grid, &g1);
        let b = grad2_t(grid, &g2);
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    }

    /// Project an admissible pair; boundary entries are zeroed on entry.
    pub fn project(&self, grid: &MappedGrid, v1: &[f64], v2: &[f64], tol: f64) -> Result<Projection> {
        let mut v1 = v1.to_vec();
        let mut v2 = v2.to_vec();
        apply_bc(grid, &mut v1, &mut v2);
        let weights = &grid.weights;
        let div_of = |r: &[f64]| -> f64 {
            r.iter().zip(weights).fold(0.0, |m, (x, w)| m.max((x / w).abs()))
        };
        let b: Vec<f64> = divergence(grid, &v1, &v2).iter().zip(weights).map(|(d, w)| -d * w).collect();
        let mut phi = vec![0.0; b.len()];
        let mut r = b.clone();
        let mut iterations = 0;
        let mut div = div_of(&r);
        if div > tol {
            let mut z = self.precondition(&r);
            let mut p = z.clone();
            let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            while div > tol {
                if iterations >= MAX_PCG {
                    return Err(Error::Projection {
                        iterations,
                        residual: div,
                    });
                }
                iterations += 1;
                let ap = Self::apply_operator(grid, &p);
                let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
                if !(pap > 0.0) {
                    return Err(Error::Projection {
                        iterations,
                        residual: div,
                    });
                }
                let alpha = rz / pap;
                for n in 0..phi.len() {
                    phi[n] += alpha * p[n];
                    r[n] -= alpha * ap[n];
                }
                div = div_of(&r);
                z = self.precondition(&r);
                let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
                let beta = rz_new / rz;
                rz = rz_new;
                for n in 0..p.len() {
                    p[n] = z[n] + beta * p[n];
                }
            }
        }
        let (mut g1, mut g2) = (grad1(grid, &phi), grad2(grid, &phi));
        apply_bc(grid, &mut g1, &mut g2);
        for n in 0..v1.len() {
            v1[n] -= g1[n];
            v2[n] -= g2[n];
        }
        let area: f64 = weights.iter().sum();
        let mean = grid.dot_w(&phi, &vec![1.0; phi.len()]) / area;
        phi.iter_mut().for_each(|x| *x -= mean);
        let divergence = max_abs(&divergence(grid, &v1, &v2));
        Ok(Projection {
            v1,
            v2,
            phi,
            iterations,
            divergence,
        })
    }
}
