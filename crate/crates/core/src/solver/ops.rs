//! Discrete operators on the mapped grid: Q1 stiffness, nodal gradients and the
//! bilinear/trilinear forms built from them.

use crate::background::BackgroundFlow;
use crate::error::{check_len, Result};
use crate::geometry::MappedGrid;

/// Borrowed velocity pair `(v1, v2)`.
pub type Vel<'a> = (&'a [f64], &'a [f64]);

const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Element stiffness of cell `(i, j)` with corners `(i,j), (i+1,j), (i+1,j+1), (i,j+1)`.
pub fn element_stiffness(grid: &MappedGrid, i: usize, j: usize) -> [[f64; 4]; 4] {
    let ip = (i + 1) % grid.nq;
    let (s0, s1) = (grid.s(j), grid.s(j + 1));
    let y = [s0 * grid.h[i], s0 * grid.h[ip], s1 * grid.h[ip], s1 * grid.h[i]];
    let dq = grid.dq;
    let mut ke = [[0.0; 4]; 4];
    for &a in &GAUSS {
        for &b in &GAUSS {
            let dn_da = [-(1.0 - b), 1.0 - b, b, -b];
            let dn_db = [-(1.0 - a), -a, a, 1.0 - a];
            let y_a: f64 = (0..4).map(|m| dn_da[m] * y[m]).sum();
            let y_b: f64 = (0..4).map(|m| dn_db[m] * y[m]).sum();
            let det = dq * y_b;
            let mut g = [[0.0; 2]; 4];
            for m in 0..4 {
                g[m][0] = dn_da[m] / dq - y_a * dn_db[m] / (dq * y_b);
                g[m][1] = dn_db[m] / y_b;
            }
            let w = 0.25 * det;
            for m in 0..4 {
                for n in 0..4 {
                    ke[m][n] += w * (g[m][0] * g[n][0] + g[m][1] * g[n][1]);
                }
            }
        }
    }
    ke
}

#[inline]
fn cell_nodes(grid: &MappedGrid, i: usize, j: usize) -> [usize; 4] {
    let ip = (i + 1) % grid.nq;
    [grid.idx(i, j), grid.idx(ip, j), grid.idx(ip, j + 1), grid.idx(i, j + 1)]
}

/// Cached element matrices of the scalar Dirichlet form.
#[derive(Debug, Clone)]
pub struct Stiffness {
    nq: usize,
    ns: usize,
    cells: Vec<[[f64; 4]; 4]>,
    nodes: Vec<[usize; 4]>,
}

impl Stiffness {
    pub fn new(grid: &MappedGrid) -> Self {
        let mut cells = Vec::with_capacity(grid.nq * grid.ns);
        let mut nodes = Vec::with_capacity(grid.nq * grid.ns);
        for i in 0..grid.nq {
            for j in 0..grid.ns {
                cells.push(element_stiffness(grid, i, j));
                nodes.push(cell_nodes(grid, i, j));
            }
        }
        Self {
            nq: grid.nq,
            ns: grid.ns,
            cells,
            nodes,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nq * (self.ns + 1)
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        for (ke, nd) in self.cells.iter().zip(&self.nodes) {
            let loc = [f[nd[0]], f[nd[1]], f[nd[2]], f[nd[3]]];
            for m in 0..4 {
                out[nd[m]] += ke[m][0] * loc[0] + ke[m][1] * loc[1] + ke[m][2] * loc[2] + ke[m][3] * loc[3];
            }
        }
        out
    }

    pub fn form(&self, f: &[f64], g: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (ke, nd) in self.cells.iter().zip(&self.nodes) {
            for m in 0..4 {
                let gm = g[nd[m]];
                if gm == 0.0 {
                    continue;
                }
                for n in 0..4 {
                    acc += gm * ke[m][n] * f[nd[n]];
                }
            }
        }
        acc
    }

    /// Visit every assembled entry `(row, col, value)`, duplicates included.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        for (ke, nd) in self.cells.iter().zip(&self.nodes) {
            for m in 0..4 {
                for n in 0..4 {
                    f(nd[m], nd[n], ke[m][n]);
                }
            }
        }
    }
}

/// `a(u, w) = ∫ ∇u : ∇w`.
pub fn a_form(u: Vel, w: Vel, grid: &MappedGrid) -> Result<f64> {
    let n = grid.n_nodes();
    for f in [u.0, u.1, w.0, w.1] {
        check_len(n, f.len())?;
    }
    let k = Stiffness::new(grid);
    Ok(k.form(u.0, w.0) + k.form(u.1, w.1))
}

/// Summation-by-parts derivative in `s`: central inside, one-sided at both walls.
#[inline]
fn ds_stencil(j: usize, ns: usize, ds: f64) -> [(usize, f64); 2] {
    if j == 0 {
        [(1, 1.0 / ds), (0, -1.0 / ds)]
    } else if j == ns {
        [(ns, 1.0 / ds), (ns - 1, -1.0 / ds)]
    } else {
        [(j + 1, 0.5 / ds), (j - 1, -0.5 / ds)]
    }
}

/// Nodal gradient operators `Gr1 = δq − (s h'/h) δs`, `Gr2 = δs / h`.
pub fn grad1(grid: &MappedGrid, f: &[f64]) -> Vec<f64> {
    let (nq, ns) = (grid.nq, grid.ns);
    let mut out = vec![0.0; f.len()];
    let cq = 0.5 / grid.dq;
    for i in 0..nq {
        let (ip, im) = ((i + 1) % nq, (i + nq - 1) % nq);
        let slope = grid.dh[i] / grid.h[i];
        for j in 0..=ns {
            let st = ds_stencil(j, ns, grid.ds);
            let dsf = st[0].1 * f[grid.idx(i, st[0].0)] + st[1].1 * f[grid.idx(i, st[1].0)];
            out[grid.idx(i, j)] = cq * (f[grid.idx(ip, j)] - f[grid.idx(im, j)]) - grid.s(j) * slope * dsf;
        }
    }
    out
}

pub fn grad2(grid: &MappedGrid, f: &[f64]) -> Vec<f64> {
    let (nq, ns) = (grid.nq, grid.ns);
    let mut out = vec![0.0; f.len()];
    for i in 0..nq {
        let inv_h = 1.0 / grid.h[i];
        for j in 0..=ns {
            let st = ds_stencil(j, ns, grid.ds);
            out[grid.idx(i, j)] = inv_h * (st[0].1 * f[grid.idx(i, st[0].0)] + st[1].1 * f[grid.idx(i, st[1].0)]);
        }
    }
    out
}

/// `Gr1ᵀ g` with respect to the plain Euclidean pairing.
pub fn grad1_t(grid: &MappedGrid, g: &[f64]) -> Vec<f64> {
    let (nq, ns) = (grid.nq, grid.ns);
    let mut out = vec![0.0; g.len()];
    let cq = 0.5 / grid.dq;
    for i in 0..nq {
        let (ip, im) = ((i + 1) % nq, (i + nq - 1) % nq);
        let slope = grid.dh[i] / grid.h[i];
        for j in 0..=ns {
            let v = g[grid.idx(i, j)];
            if v == 0.0 {
                continue;
            }
            out[grid.idx(ip, j)] += cq * v;
            out[grid.idx(im, j)] -= cq * v;
            let m = grid.s(j) * slope * v;
            for (l, c) in ds_stencil(j, ns, grid.ds) {
                out[grid.idx(i, l)] -= m * c;
            }
        }
    }
    out
}

pub fn grad2_t(grid: &MappedGrid, g: &[f64]) -> Vec<f64> {
    let (nq, ns) = (grid.nq, grid.ns);
    let mut out = vec![0.0; g.len()];
    for i in 0..nq {
        let inv_h = 1.0 / grid.h[i];
        for j in 0..=ns {
            let v = g[grid.idx(i, j)] * inv_h;
            if v == 0.0 {
                continue;
            }
            for (l, c) in ds_stencil(j, ns, grid.ds) {
                out[grid.idx(i, l)] += c * v;
            }
        }
    }
    out
}

/// Sparse rows of `Gr1` and `Gr2` for node `(i, j)`.
pub(crate) fn grad_rows(grid: &MappedGrid, i: usize, j: usize) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
    let (nq, ns) = (grid.nq, grid.ns);
    let (ip, im) = ((i + 1) % nq, (i + nq - 1) % nq);
    let cq = 0.5 / grid.dq;
    let st = ds_stencil(j, ns, grid.ds);
    let m = grid.s(j) * grid.dh[i] / grid.h[i];
    let mut r1 = vec![(grid.idx(ip, j), cq), (grid.idx(im, j), -cq)];
    let mut r2 = Vec::with_capacity(2);
    for (l, c) in st {
        if m != 0.0 {
            r1.push((grid.idx(i, l), -m * c));
        }
        r2.push((grid.idx(i, l), c / grid.h[i]));
    }
    (r1, r2)
}

/// Admissible-velocity masks: `v1` free below the top row, `v2` free strictly inside.
#[inline]
pub fn v1_free(j: usize, ns: usize) -> bool {
    j < ns
}

#[inline]
pub fn v2_free(j: usize, ns: usize) -> bool {
    j > 0 && j < ns
}

/// Zero the constrained entries of a velocity pair in place.
pub fn apply_bc(grid: &MappedGrid, v1: &mut [f64], v2: &mut [f64]) {
    for i in 0..grid.nq {
        v1[grid.idx(i, grid.ns)] = 0.0;
        v2[grid.idx(i, 0)] = 0.0;
        v2[grid.idx(i, grid.ns)] = 0.0;
    }
}

/// Discrete divergence `−M⁻¹(Gr1ᵀ M v1 + Gr2ᵀ M v2)` of an admissible field.
pub fn divergence(grid: &MappedGrid, v1: &[f64], v2: &[f64]) -> Vec<f64> {
    let m1: Vec<f64> = grid.weights.iter().zip(v1).map(|(w, v)| w * v).collect();
    let m2: Vec<f64> = grid.weights.iter().zip(v2).map(|(w, v)| w * v).collect();
    let a = grad1_t(grid, &m1);
    let b = grad2_t(grid, &m2);
    a.iter()
        .zip(&b)
        .zip(&grid.weights)
        .map(|((x, y), w)| -(x + y) / w)
        .collect()
}

/// Flux-form divergence `(1/h)[δq(h v1) + δs(v2 − s h' v1)]`, central in the interior.
pub fn divergence_flux_interior(grid: &MappedGrid, v1: &[f64], v2: &[f64], i: usize, j: usize) -> f64 {
    let nq = grid.nq;
    let (ip, im) = ((i + 1) % nq, (i + nq - 1) % nq);
    let fq = (grid.h[ip] * v1[grid.idx(ip, j)] - grid.h[im] * v1[grid.idx(im, j)]) / (2.0 * grid.dq);
    let flux = |l: usize| v2[grid.idx(i, l)] - grid.s(l) * grid.dh[i] * v1[grid.idx(i, l)];
    let fs = (flux(j + 1) - flux(j - 1)) / (2.0 * grid.ds);
    (fq + fs) / grid.h[i]
}

/// Skew advection `N(u, v)` per component; `Σ_c (N_c(u,v), v_c)_M = 0` exactly.
pub fn advect_skew(grid: &MappedGrid, u: Vel, v: &[f64]) -> Vec<f64> {
    let g1 = grad1(grid, v);
    let g2 = grad2(grid, v);
    let f1: Vec<f64> = (0..v.len()).map(|n| grid.weights[n] * u.0[n] * v[n]).collect();
    let f2: Vec<f64> = (0..v.len()).map(|n| grid.weights[n] * u.1[n] * v[n]).collect();
    let t1 = grad1_t(grid, &f1);
    let t2 = grad2_t(grid, &f2);
    (0..v.len())
        .map(|n| 0.5 * (u.0[n] * g1[n] + u.1[n] * g2[n] - (t1[n] + t2[n]) / grid.weights[n]))
        .collect()
}

/// `½[((u·∇)v, w) − ((u·∇)w, v)]` with the nodal gradient and lumped quadrature.
pub fn b_skew(u: Vel, v: Vel, w: Vel, grid: &MappedGrid) -> Result<f64> {
    let n = grid.n_nodes();
    for f in [u.0, u.1, v.0, v.1, w.0, w.1] {
        check_len(n, f.len())?;
    }
    let conv = |a: &[f64], b: &[f64]| -> f64 {
        let g1 = grad1(grid, a);
        let g2 = grad2(grid, a);
        (0..n)
            .map(|m| grid.weights[m] * (u.0[m] * g1[m] + u.1[m] * g2[m]) * b[m])
            .sum()
    };
    Ok(0.5 * (conv(v.0, w.0) + conv(v.1, w.1) - conv(w.0, v.0) - conv(w.1, v.1)))
}

/// Pointwise homogenized forcing `G(v) = −U v,x1 − v2 U' e1 + ν U'' e1`.
pub fn forcing_term(v: Vel, xi: &BackgroundFlow, nu: f64, grid: &MappedGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.n_nodes();
    check_len(n, v.0.len())?;
    check_len(n, v.1.len())?;
    let d1 = grad1(grid, v.0);
    let d2 = grad1(grid, v.1);
    let g1 = (0..n)
        .map(|m| -xi.u[m] * d1[m] - v.1[m] * xi.du[m] + nu * xi.ddu[m])
        .collect();
    let g2 = (0..n).map(|m| -xi.u[m] * d2[m]).collect();
    Ok((g1, g2))
}

/// `(L(v), Θ) = −ν a(ξ, Θ) − b(ξ, v, Θ) − b(v, ξ, Θ)` with the skew trilinear form.
pub fn l_functional(v: Vel, theta: Vel, xi: &BackgroundFlow, nu: f64, grid: &MappedGrid) -> Result<f64> {
    let zero = vec![0.0; grid.n_nodes()];
    let xv = (&xi.u[..], &zero[..]);
    Ok(-nu * a_form(xv, theta, grid)? - b_skew(xv, v, theta, grid)? - b_skew(v, xv, theta, grid)?)
}

/// `(G(v), Θ)` under the lumped quadrature.
pub fn g_pairing(v: Vel, theta: Vel, xi: &BackgroundFlow, nu: f64, grid: &MappedGrid) -> Result<f64> {
    let (g1, g2) = forcing_term(v, xi, nu, grid)?;
    Ok(grid.dot_w(&g1, theta.0) + grid.dot_w(&g2, theta.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, ChannelGeometry, GapProfile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn wavy(n: usize) -> MappedGrid {
        let gap = GapProfile {
            mean: 1.0,
            cos: vec![0.15],
            sin: vec![0.05],
        };
        build_grid(&ChannelGeometry::new(1.0, gap, n, n).unwrap()).unwrap()
    }

    fn flat(n: usize) -> MappedGrid {
        build_grid(&ChannelGeometry::flat(1.0, 1.0, n, n).unwrap()).unwrap()
    }

    fn random_field(g: &MappedGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..g.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn stiffness_annihilates_constants_and_is_symmetric() {
        let g = wavy(12);
        let k = Stiffness::new(&g);
        let ones = vec![1.0; g.n_nodes()];
        assert!(k.apply(&ones).iter().all(|v| v.abs() < 1e-12));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_field(&g, &mut rng);
        let b = random_field(&g, &mut rng);
        let (ab, ba) = (k.form(&a, &b), k.form(&b, &a));
        assert!((ab - ba).abs() < 1e-12 * ab.abs().max(1.0));
        assert!(k.form(&a, &a) > 0.0);
    }

    #[test]
    fn stiffness_is_exact_on_linear_fields() {
        let g = wavy(16);
        let f = g.field_from_fn(|_, x2| 3.0 * x2);
        let k = Stiffness::new(&g);
        let area: f64 = g.h.iter().sum::<f64>() * g.dq;
        assert!((k.form(&f, &f) - 9.0 * area).abs() < 1e-9);
    }

    #[test]
    fn a_form_refinement() {
        let exact = PI * PI / 15.0 + 1.0 / 6.0;
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let g = flat(n);
            let u = g.field_from_fn(|x1, x2| (2.0 * PI * x1).sin() * x2 * (1.0 - x2));
            let z = vec![0.0; g.n_nodes()];
            errs.push((a_form((&u, &z), (&u, &z), &g).unwrap() - exact).abs());
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
        }
        assert_eq!(a_form((&[0.0; 3], &[0.0; 3]), (&[0.0; 3], &[0.0; 3]), &flat(8)).unwrap_err().category(), "shape");
    }

    #[test]
    fn transposes_are_adjoint() {
        let g = wavy(10);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_field(&g, &mut rng);
        let h = random_field(&g, &mut rng);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!((dot(&grad1(&g, &f), &h) - dot(&f, &grad1_t(&g, &h))).abs() < 1e-10);
        assert!((dot(&grad2(&g, &f), &h) - dot(&f, &grad2_t(&g, &h))).abs() < 1e-10);
        for i in [0, 3, 9] {
            for j in [0, 4, 10] {
                let (r1, r2) = grad_rows(&g, i, j);
                let a: f64 = r1.iter().map(|(n, c)| c * f[*n]).sum();
                let b: f64 = r2.iter().map(|(n, c)| c * f[*n]).sum();
                assert!((a - grad1(&g, &f)[g.idx(i, j)]).abs() < 1e-12);
                assert!((b - grad2(&g, &f)[g.idx(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nodal_gradient_is_second_order_inside() {
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let g = wavy(n);
            let f = g.field_from_fn(|x1, x2| (2.0 * PI * x1).sin() * x2 * x2);
            let d1 = grad1(&g, &f);
            let d2 = grad2(&g, &f);
            let mut e: f64 = 0.0;
            for i in 0..g.nq {
                for j in 1..g.ns {
                    let (x1, x2) = (g.x1(i), g.x2(i, j));
                    e = e.max((d1[g.idx(i, j)] - 2.0 * PI * (2.0 * PI * x1).cos() * x2 * x2).abs());
                    e = e.max((d2[g.idx(i, j)] - 2.0 * (2.0 * PI * x1).sin() * x2).abs());
                }
            }
            errs.push(e);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn weak_divergence_matches_flux_form_inside() {
        let g = wavy(16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut v1 = random_field(&g, &mut rng);
        let mut v2 = random_field(&g, &mut rng);
        apply_bc(&g, &mut v1, &mut v2);
        let d = divergence(&g, &v1, &v2);
        for i in 0..g.nq {
            for j in 2..g.ns - 1 {
                let f = divergence_flux_interior(&g, &v1, &v2, i, j);
                assert!((d[g.idx(i, j)] - f).abs() < 1e-9 * (1.0 + f.abs()), "{i} {j}");
            }
        }
    }

    #[test]
    fn skew_form_is_antisymmetric() {
        let g = wavy(12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f: Vec<Vec<f64>> = (0..6).map(|_| random_field(&g, &mut rng)).collect();
        let u = (&f[0][..], &f[1][..]);
        let v = (&f[2][..], &f[3][..]);
        let w = (&f[4][..], &f[5][..]);
        let vw = b_skew(u, v, w, &g).unwrap();
        let wv = b_skew(u, w, v, &g).unwrap();
        assert!((vw + wv).abs() < 1e-12 * vw.abs().max(1.0));
        assert!(b_skew(u, v, v, &g).unwrap().abs() < 1e-12);
        let z = vec![0.0; g.n_nodes()];
        assert_eq!(b_skew((&z, &z), v, w, &g).unwrap(), 0.0);
        let n1 = advect_skew(&g, u, v.0);
        let n2 = advect_skew(&g, u, v.1);
        let paired = g.dot_w(&n1, w.0) + g.dot_w(&n2, w.1);
        assert!((paired - vw).abs() < 1e-11 * vw.abs().max(1.0));
    }

    #[test]
    fn skew_form_converges_for_divergence_free_data() {
        // u = curl of sin(2πx1)·x2²(1−x2)², v = (x2, 0), w = (cos 2πx1, 0) on the unit square.
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let g = flat(n);
            let tp = 2.0 * PI;
            let u1 = g.field_from_fn(|x1, x2| (tp * x1).sin() * (2.0 * x2 * (1.0 - x2).powi(2) - 2.0 * x2 * x2 * (1.0 - x2)));
            let u2 = g.field_from_fn(|x1, x2| -tp * (tp * x1).cos() * x2 * x2 * (1.0 - x2).powi(2));
            let v1 = g.field_from_fn(|_, x2| x2);
            let w1 = g.field_from_fn(|x1, _| (tp * x1).cos());
            let z = vec![0.0; g.n_nodes()];
            let b = b_skew((&u1, &u2), (&v1, &z), (&w1, &z), &g).unwrap();
            // ∫ u2 cos(2πx1) = −2π ∫cos² ∫x2²(1−x2)² = −π/30
            errs.push((b + PI / 30.0).abs());
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.7, "{errs:?}");
        }
    }

    #[test]
    fn forcing_examples() {
        let g = wavy(16);
        let xi = crate::background::build_background(1.0, 0.5, &g, 0.1).unwrap();
        let z = vec![0.0; g.n_nodes()];
        let (g1, g2) = forcing_term((&z, &z), &xi, 0.1, &g).unwrap();
        for m in 0..g.n_nodes() {
            assert_eq!(g1[m], 0.1 * xi.ddu[m]);
            assert_eq!(g2[m], 0.0);
        }
        let xi0 = crate::background::build_background(0.0, 0.5, &g, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_field(&g, &mut rng);
        let b = random_field(&g, &mut rng);
        let (g1, g2) = forcing_term((&a, &b), &xi0, 0.1, &g).unwrap();
        assert!(g1.iter().chain(&g2).all(|v| *v == 0.0));
    }
}
