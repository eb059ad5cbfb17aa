//! Complex sparse matrices, a sparse Cholesky wrapper and Krylov helpers.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{GeoError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Compressed sparse row matrix with complex entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub data: Vec<Complex64>,
}

impl CsrMatrix {
    /// Builds from unsorted triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(u32, u32, Complex64)>) -> Self {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<Complex64> = Vec::with_capacity(t.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k] as usize, self.data[k]))
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .into_par_iter()
            .map(|i| self.row(i).map(|(j, a)| a * x[j]).sum())
            .collect()
    }

    /// `y = A^H x`
    pub fn adjoint_mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![ZERO; self.ncols];
        for i in 0..self.nrows {
            let xi = x[i];
            if xi == ZERO {
                continue;
            }
            for (j, a) in self.row(i) {
                y[j] += a.conj() * xi;
            }
        }
        y
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CsrMatrix {
        let mut count = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            count[c as usize + 1] += 1;
        }
        for j in 0..self.ncols {
            count[j + 1] += count[j];
        }
        let mut next = count.clone();
        let mut indices = vec![0u32; self.nnz()];
        let mut data = vec![ZERO; self.nnz()];
        for i in 0..self.nrows {
            for (j, a) in self.row(i) {
                let k = next[j];
                indices[k] = i as u32;
                data[k] = a.conj();
                next[j] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr: count,
            indices,
            data,
        }
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows);
        let rows: Vec<(Vec<u32>, Vec<Complex64>)> = (0..self.nrows)
            .into_par_iter()
            .map_init(
                || {
                    (
                        vec![usize::MAX; other.ncols],
                        Vec::<u32>::new(),
                        Vec::<Complex64>::new(),
                    )
                },
                |(mark, cols, vals), i| {
                    cols.clear();
                    vals.clear();
                    for (k, a) in self.row(i) {
                        for (j, b) in other.row(k) {
                            if mark[j] == usize::MAX {
                                mark[j] = cols.len();
                                cols.push(j as u32);
                                vals.push(a * b);
                            } else {
                                vals[mark[j]] += a * b;
                            }
                        }
                    }
                    let mut order: Vec<usize> = (0..cols.len()).collect();
                    order.sort_unstable_by_key(|&k| cols[k]);
                    let c: Vec<u32> = order.iter().map(|&k| cols[k]).collect();
                    let v: Vec<Complex64> = order.iter().map(|&k| vals[k]).collect();
                    for &j in cols.iter() {
                        mark[j as usize] = usize::MAX;
                    }
                    (c, v)
                },
            )
            .collect();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for (c, v) in rows {
            indices.extend(c);
            data.extend(v);
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Submatrix on the given row and column index sets.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut map = vec![u32::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            map[c] = k as u32;
        }
        let mut t = Vec::new();
        for (r, &i) in rows.iter().enumerate() {
            for (j, a) in self.row(i) {
                if map[j] != u32::MAX {
                    t.push((r as u32, map[j], a));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), t)
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| {
                self.row(i)
                    .find(|&(j, _)| j == i)
                    .map(|(_, a)| a)
                    .unwrap_or(ZERO)
            })
            .collect()
    }

    /// Largest `|A - A^H|` entry relative to the largest entry.
    pub fn hermitian_defect(&self) -> f64 {
        let ah = self.adjoint();
        let scale = self
            .data
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(1e-300);
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            let mut a: Vec<(usize, Complex64)> = self.row(i).collect();
            let mut b: Vec<(usize, Complex64)> = ah.row(i).collect();
            a.sort_by_key(|p| p.0);
            b.sort_by_key(|p| p.0);
            let (mut p, mut q) = (0, 0);
            while p < a.len() || q < b.len() {
                let (ja, jb) = (a.get(p).map(|x| x.0), b.get(q).map(|x| x.0));
                let d = match (ja, jb) {
                    (Some(x), Some(y)) if x == y => {
                        p += 1;
                        q += 1;
                        a[p - 1].1 - b[q - 1].1
                    }
                    (Some(x), Some(y)) if x < y => {
                        p += 1;
                        a[p - 1].1
                    }
                    (Some(_), None) => {
                        p += 1;
                        a[p - 1].1
                    }
                    _ => {
                        q += 1;
                        b[q - 1].1
                    }
                };
                worst = worst.max(d.norm());
            }
        }
        worst / scale
    }
}

/// Sparse Cholesky factorization of a Hermitian positive definite matrix.
pub struct Cholesky {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, faer::c64>,
}

impl std::fmt::Debug for Cholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cholesky").field("n", &self.n).finish()
    }
}

impl Cholesky {
    /// Factors the lower triangle of a Hermitian matrix.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(GeoError::LinearAlgebra(
                "Cholesky of a non-square matrix".into(),
            ));
        }
        let mut t = Vec::with_capacity(a.nnz() / 2 + a.nrows);
        for i in 0..a.nrows {
            for (j, v) in a.row(i) {
                if j <= i {
                    t.push(Triplet::new(i, j, faer::c64::new(v.re, v.im)));
                }
            }
        }
        let m = SparseColMat::<usize, faer::c64>::try_new_from_triplets(a.nrows, a.ncols, &t)
            .map_err(|e| GeoError::LinearAlgebra(format!("sparse assembly: {e:?}")))?;
        let llt = m
            .sp_cholesky(Side::Lower)
            .map_err(|e| GeoError::LinearAlgebra(format!("Cholesky failed: {e:?}")))?;
        Ok(Cholesky { n: a.nrows, llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n);
        let mut rhs = Mat::<faer::c64>::from_fn(self.n, 1, |i, _| faer::c64::new(b[i].re, b[i].im));
        self.llt.solve_in_place(rhs.as_mut());
        (0..self.n)
            .map(|i| {
                let z = rhs[(i, 0)];
                Complex64::new(z.re, z.im)
            })
            .collect()
    }
}

/// `Σ_{i<n} f(i)`, evaluated in parallel over fixed blocks and combined in
/// index order, so the result does not depend on the thread count.
pub fn ordered_sum<T, F>(n: usize, f: F) -> T
where
    T: Send + std::iter::Sum<T>,
    F: Fn(usize) -> T + Sync,
{
    const BLOCK: usize = 256;
    let blocks = n.div_ceil(BLOCK);
    let partial: Vec<T> = (0..blocks)
        .into_par_iter()
        .map(|b| (b * BLOCK..((b + 1) * BLOCK).min(n)).map(&f).sum())
        .collect();
    partial.into_iter().sum()
}

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // Σ a_i conj(b_i)
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(y: &mut [Complex64], c: Complex64, x: &[Complex64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += c * b;
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct IterativeOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for a Hermitian positive
/// definite operator.
pub fn preconditioned_cg(
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    diag: &[f64],
    b: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Complex64>, IterativeOutcome)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![ZERO; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            IterativeOutcome {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z: Vec<Complex64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&z, &r);
    for it in 0..max_iter {
        let ap = apply(&p);
        let alpha = rz / dot(&ap, &p);
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        let rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok((
                x,
                IterativeOutcome {
                    iterations: it + 1,
                    relative_residual: rel,
                },
            ));
        }
        z = r.iter().zip(diag).map(|(a, d)| a / d).collect();
        let rz_new = dot(&z, &r);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(GeoError::NoConvergence {
        residual: norm(&r) / bnorm,
        iterations: max_iter,
    })
}

/// Extreme Ritz values of a Hermitian operator after `steps` Lanczos
/// iterations with full reorthogonalization, with respect to the inner
/// product `<x, y>_W = dot(weight(x), y)`.
pub fn lanczos_extremes(
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    weight: impl Fn(&[Complex64]) -> Vec<Complex64>,
    start: &[Complex64],
    steps: usize,
) -> (f64, f64) {
    let ip = |a: &[Complex64], b: &[Complex64]| dot(&weight(a), b);
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let n0 = ip(start, start).re.sqrt();
    let mut q: Vec<Complex64> = start.iter().map(|z| z / n0).collect();
    for _ in 0..steps {
        let mut w = apply(&q);
        let alpha = ip(&w, &q).re;
        basis.push(q.clone());
        alphas.push(alpha);
        for b in &basis {
            let c = ip(&w, b);
            axpy(&mut w, -c, b);
        }
        for b in &basis {
            let c = ip(&w, b);
            axpy(&mut w, -c, b);
        }
        let beta = ip(&w, &w).re.max(0.0).sqrt();
        if beta < 1e-14 * alpha.abs().max(1e-300) {
            break;
        }
        betas.push(beta);
        q = w.iter().map(|z| z / beta).collect();
    }
    let k = alphas.len();
    let t = nalgebra::DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j || j + 1 == i {
            betas[i.min(j)]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigenvalues();
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i as u32, i as u32, c(2.1)));
            if i > 0 {
                t.push((i as u32, i as u32 - 1, Complex64::new(-1.0, 0.1)));
            }
            if i + 1 < n {
                t.push((i as u32, i as u32 + 1, Complex64::new(-1.0, -0.1)));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a =
            CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0)), (0, 1, c(2.0)), (1, 0, c(4.0))]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.mul_vec(&[c(1.0), c(1.0)]), vec![c(3.0), c(4.0)]);
    }

    #[test]
    fn adjoint_and_product_are_consistent() {
        let a = laplacian_1d(7);
        assert!(a.hermitian_defect() < 1e-15);
        let x: Vec<Complex64> = (0..7)
            .map(|i| Complex64::new(i as f64, 1.0 - i as f64))
            .collect();
        let aa = a.matmul(&a.adjoint());
        let y1 = aa.mul_vec(&x);
        let y2 = a.mul_vec(&a.adjoint_mul_vec(&x));
        for (p, q) in y1.iter().zip(&y2) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn cholesky_and_cg_agree() {
        let a = laplacian_1d(50);
        let b: Vec<Complex64> = (0..50)
            .map(|i| Complex64::new((i as f64).sin(), 0.3))
            .collect();
        let x1 = Cholesky::factor(&a).unwrap().solve(&b);
        let diag: Vec<f64> = a.diagonal().iter().map(|z| z.re).collect();
        let (x2, out) = preconditioned_cg(|v| a.mul_vec(v), &diag, &b, 1e-12, 500).unwrap();
        assert!(out.relative_residual <= 1e-12);
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).norm() < 1e-9);
        }
    }

    #[test]
    fn lanczos_finds_laplacian_extremes() {
        let n = 30;
        let a = laplacian_1d(n);
        let start: Vec<Complex64> = (0..n).map(|i| c(1.0 + (i as f64 * 0.7).sin())).collect();
        let (lo, hi) = lanczos_extremes(|v| a.mul_vec(v), |v| v.to_vec(), &start, n);
        let mut t = nalgebra::DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for (j, v) in a.row(i) {
                t[(i, j)] = v;
            }
        }
        let ev = t.symmetric_eigenvalues();
        let emin = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        let emax = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((lo - emin).abs() < 1e-8 && (hi - emax).abs() < 1e-8);
    }
}
