//! Sparse storage, preconditioned conjugate gradients and preconditioners.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a square matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[range.clone()]
            .binary_search(&col)
            .map(|k| self.values[range.start + k])
            .unwrap_or(0.0)
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `x^T A y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut ay = vec![0.0; self.n];
        self.matvec(y, &mut ay);
        dot(x, &ay)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Symmetric positive definite operator `x -> A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

/// `A + diag(shift)`.
pub struct ShiftedOperator<'a> {
    pub matrix: &'a CsrMatrix,
    pub shift: &'a [f64],
}

impl LinearOperator for ShiftedOperator<'_> {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.matvec(x, y);
        for ((yi, xi), si) in y.iter_mut().zip(x).zip(self.shift) {
            *yi += si * xi;
        }
    }
}

pub trait Preconditioner {
    /// `z = P^{-1} r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        Self {
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// Exact inverse of the 5-point Laplacian `4 u_ij - u_(i+-1)j - u_i(j+-1)` on
/// the `(n-1)^2` interior nodes of a uniform grid, diagonalized by the
/// two-dimensional type-I discrete sine transform.
pub struct SpectralPoisson {
    m: usize,
    fft: Arc<dyn Fft<f64>>,
    inv_eig: Vec<f64>,
}

impl std::fmt::Debug for SpectralPoisson {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPoisson").field("m", &self.m).finish()
    }
}

impl SpectralPoisson {
    /// `n` squares per side; acts on vectors of length `(n-1)^2` ordered with
    /// the x index running fastest.
    pub fn new(n: usize) -> Self {
        let m = n - 1;
        let fft = FftPlanner::new().plan_fft_forward(2 * n);
        let lam = |k: usize| 2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos();
        let mut inv_eig = Vec::with_capacity(m * m);
        for l in 1..=m {
            for k in 1..=m {
                inv_eig.push(1.0 / (lam(k) + lam(l)));
            }
        }
        Self { m, fft, inv_eig }
    }

    /// Unnormalized DST-I of every contiguous row of length `m`.
    fn dst_rows(&self, data: &mut [f64]) {
        let m = self.m;
        let len = 2 * (m + 1);
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for row in data.chunks_mut(m) {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (j, &x) in row.iter().enumerate() {
                buf[j + 1].re = x;
                buf[len - 1 - j].re = -x;
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, out) in row.iter_mut().enumerate() {
                *out = -0.5 * buf[k + 1].im;
            }
        }
    }

    fn transpose(&self, data: &mut [f64]) {
        let m = self.m;
        for i in 0..m {
            for j in (i + 1)..m {
                data.swap(i * m + j, j * m + i);
            }
        }
    }

    pub fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        out.copy_from_slice(rhs);
        self.dst_rows(out);
        self.transpose(out);
        self.dst_rows(out);
        // eigenvalues are symmetric in (k, l), so the transposed layout is fine
        for (v, s) in out.iter_mut().zip(&self.inv_eig) {
            *v *= s;
        }
        self.dst_rows(out);
        self.transpose(out);
        self.dst_rows(out);
        let scale = (2.0 / (self.m + 1) as f64).powi(2);
        out.iter_mut().for_each(|v| *v *= scale);
    }
}

impl Preconditioner for SpectralPoisson {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.solve(r, z)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Preconditioned conjugate gradients; `x` holds the initial guess on entry.
pub fn pcg(
    a: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    precond: &dyn Preconditioner,
    opts: CgOptions,
) -> Result<CgOutcome> {
    let n = a.dim();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = norm2(&r) / b_norm;
    for it in 0..opts.max_iter {
        if rel <= opts.rel_tol {
            return Ok(CgOutcome {
                iterations: it,
                rel_residual: rel,
            });
        }
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Numeric(format!(
                "conjugate gradients broke down (p^T A p = {pap:e})"
            )));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        rel = norm2(&r) / b_norm;
        precond.apply(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if rel <= opts.rel_tol {
        return Ok(CgOutcome {
            iterations: opts.max_iter,
            rel_residual: rel,
        });
    }
    Err(Error::Numeric(format!(
        "conjugate gradients did not reach relative residual {:e} in {} iterations (at {rel:e})",
        opts.rel_tol, opts.max_iter
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn laplacian(n: usize) -> CsrMatrix {
        let m = n - 1;
        let mut t = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let k = i + j * m;
                t.push((k, k, 4.0));
                if i > 0 {
                    t.push((k, k - 1, -1.0));
                }
                if i + 1 < m {
                    t.push((k, k + 1, -1.0));
                }
                if j > 0 {
                    t.push((k, k - m, -1.0));
                }
                if j + 1 < m {
                    t.push((k, k + m, -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(m * m, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, -1.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn spectral_solver_inverts_stencil() {
        for n in [2, 5, 12] {
            let a = laplacian(n);
            let dim = a.dim();
            let x: Vec<f64> = (0..dim).map(|k| ((k * 7 + 3) % 11) as f64 - 5.0).collect();
            let mut b = vec![0.0; dim];
            a.matvec(&x, &mut b);
            let mut sol = vec![0.0; dim];
            SpectralPoisson::new(n).solve(&b, &mut sol);
            for (s, e) in sol.iter().zip(&x) {
                assert_abs_diff_eq!(s, e, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn jacobi_and_spectral_cg_agree() {
        let n = 16;
        let a = laplacian(n);
        let dim = a.dim();
        let b: Vec<f64> = (0..dim).map(|k| (k as f64 * 0.37).sin()).collect();
        let opts = CgOptions {
            rel_tol: 1e-12,
            max_iter: 1000,
        };
        let mut x1 = vec![0.0; dim];
        let out1 = pcg(&a, &b, &mut x1, &Jacobi::new(&a.diagonal()), opts).unwrap();
        let mut x2 = vec![0.0; dim];
        let out2 = pcg(&a, &b, &mut x2, &SpectralPoisson::new(n), opts).unwrap();
        assert!(out2.iterations <= 2 && out1.iterations > out2.iterations);
        for (u, v) in x1.iter().zip(&x2) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-9);
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let a = laplacian(30);
        let b = vec![1.0; a.dim()];
        let mut x = vec![0.0; a.dim()];
        let opts = CgOptions {
            rel_tol: 1e-14,
            max_iter: 3,
        };
        assert!(matches!(
            pcg(&a, &b, &mut x, &Jacobi::new(&a.diagonal()), opts),
            Err(Error::Numeric(_))
        ));
    }
}
