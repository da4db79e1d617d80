//! Small sparse and banded linear-algebra kernels used by the solver.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, Default)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Build from per-row entry lists; duplicate columns are summed.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows.iter().cloned() {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < ncols);
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: rows.len(),
            ncols,
            indptr,
            indices,
            values,
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        for (r, out) in y.iter_mut().enumerate().take(self.nrows) {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// `y = Aᵀ x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate().take(self.nrows) {
            if xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.values[k] * xr;
            }
        }
        y
    }
}

/// Symmetric positive definite banded matrix with an in-place Cholesky factor.
///
/// Only the lower band is stored: entry `(r, c)` with `r - bw <= c <= r`
/// lives at `data[r * (bw + 1) + c + bw - r]`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
    factored: bool,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> usize {
        r * (self.bw + 1) + c + self.bw - r
    }

    /// Add `v` to the symmetric pair `(r, c)`/`(c, r)`. Entries outside the band panic.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        assert!(r - c <= self.bw, "entry ({r},{c}) outside band {}", self.bw);
        let k = self.at(r, c);
        self.data[k] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        if r - c > self.bw {
            0.0
        } else {
            self.data[self.at(r, c)]
        }
    }

    pub fn factor(&mut self) -> Result<()> {
        let (n, bw) = (self.n, self.bw);
        for r in 0..n {
            let c0 = r.saturating_sub(bw);
            for c in c0..=r {
                let mut sum = self.data[self.at(r, c)];
                let k0 = c0.max(c.saturating_sub(bw));
                for k in k0..c {
                    sum -= self.data[self.at(r, k)] * self.data[self.at(c, k)];
                }
                if c == r {
                    if !(sum > 0.0) {
                        return Err(Error::Linear(format!(
                            "matrix not positive definite at row {r} (pivot {sum:.3e})"
                        )));
                    }
                    let k = self.at(r, r);
                    self.data[k] = sum.sqrt();
                } else {
                    let k = self.at(r, c);
                    self.data[k] = sum / self.data[self.at(c, c)];
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert!(self.factored, "solve before factor");
        let (n, bw) = (self.n, self.bw);
        for r in 0..n {
            let mut sum = x[r];
            for k in r.saturating_sub(bw)..r {
                sum -= self.data[self.at(r, k)] * x[k];
            }
            x[r] = sum / self.data[self.at(r, r)];
        }
        for r in (0..n).rev() {
            let mut sum = x[r];
            for k in r + 1..(r + bw + 1).min(n) {
                sum -= self.data[self.at(k, r)] * x[k];
            }
            x[r] = sum / self.data[self.at(r, r)];
        }
    }
}

/// Ordering of periodic column indices `0, n-1, 1, n-2, ...` so that periodic
/// neighbours (including the wrap `n-1 ↔ 0`) sit at most two positions apart.
pub fn folded_position(i: usize, n: usize) -> usize {
    if 2 * i < n {
        2 * i
    } else {
        2 * (n - 1 - i) + 1
    }
}

/// Dense SPD Cholesky solve (row-major `n × n`), used for small condensed systems.
pub fn dense_cholesky_solve(a: &mut [f64], n: usize, b: &mut [f64]) -> Result<()> {
    for r in 0..n {
        for c in 0..=r {
            let mut sum = a[r * n + c];
            for k in 0..c {
                sum -= a[r * n + k] * a[c * n + k];
            }
            if r == c {
                if !(sum > 0.0) {
                    return Err(Error::Linear(format!("dense pivot {sum:.3e} at row {r}")));
                }
                a[r * n + r] = sum.sqrt();
            } else {
                a[r * n + c] = sum / a[c * n + c];
            }
        }
    }
    for r in 0..n {
        let mut sum = b[r];
        for k in 0..r {
            sum -= a[r * n + k] * b[k];
        }
        b[r] = sum / a[r * n + r];
    }
    for r in (0..n).rev() {
        let mut sum = b[r];
        for k in r + 1..n {
            sum -= a[k * n + r] * b[k];
        }
        b[r] = sum / a[r * n + r];
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
