//! Random smooth admissible velocity fields.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::Result;
use crate::geometry::MappedGrid;
use crate::solver::Projector;

const MODES_Q: usize = 4;
const MODES_S: usize = 4;

/// Low-mode random field meeting the wall conditions, before projection.
///
/// `v1` uses `cos((n − ½)πs)` so it vanishes on the top wall only; `v2` uses
/// `sin(nπs)` and vanishes on both walls. Amplitudes decay like `1/(1 + m² + n²)`.
pub fn random_smooth<R: Rng>(grid: &MappedGrid, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let mq = MODES_Q.min(grid.nq / 4);
    let mut coef = Vec::new();
    for m in 0..=mq {
        for n in 1..=MODES_S {
            let decay = 1.0 / (1.0 + (m * m + n * n) as f64);
            let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0) * decay);
            coef.push((m, n, c));
        }
    }
    let l = grid.period();
    let mut v1 = vec![0.0; grid.n_nodes()];
    let mut v2 = vec![0.0; grid.n_nodes()];
    for i in 0..grid.nq {
        let x = grid.x1(i);
        for j in 0..=grid.ns {
            let s = grid.s(j);
            let (mut a, mut b) = (0.0, 0.0);
            for &(m, n, c) in &coef {
                let arg = 2.0 * PI * m as f64 * x / l;
                let (cs, sn) = (arg.cos(), arg.sin());
                let f1 = ((n as f64 - 0.5) * PI * s).cos();
                let f2 = (n as f64 * PI * s).sin();
                a += (c[0] * cs + c[1] * sn) * f1;
                b += (c[2] * cs + c[3] * sn) * f2;
            }
            let k = grid.idx(i, j);
            v1[k] = a;
            v2[k] = b;
        }
    }
    crate::solver::apply_bc(grid, &mut v1, &mut v2);
    (v1, v2)
}

/// Random smooth field projected onto discretely divergence-free admissible fields.
pub fn random_admissible<R: Rng>(
    grid: &MappedGrid,
    projector: &Projector,
    rng: &mut R,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (v1, v2) = random_smooth(grid, rng);
    let p = projector.project(grid, &v1, &v2, tol)?;
    Ok((p.v1, p.v2))
}
