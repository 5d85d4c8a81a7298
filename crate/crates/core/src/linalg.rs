//! Small dense linear algebra kernel.
//!
//! Row-major `f64` matrices with the handful of factorizations the filters
//! need: Cholesky for SPD solves and log-determinants, cyclic Jacobi for
//! symmetric eigenvalues, and partially pivoted LU for general inverses.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Column vector.
    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self.mul(other))
    }

    /// Product without the dimension check; panics on mismatch.
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T`.
    pub fn mul_t(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matrix product dimension mismatch");
        Matrix::from_fn(self.rows, other.rows, |i, j| dot(self.row(i), other.row(j)))
    }

    /// `self^T * other`.
    pub fn t_mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "matrix product dimension mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &bv) in out.row_mut(i).iter_mut().zip(b) {
                    *o += a * bv;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `self^T v`.
    pub fn t_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "matrix-vector dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            axpy(vi, self.row(i), &mut out);
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "elementwise dimension mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn add_diag(&mut self, v: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += v;
        }
    }

    /// Replaces the matrix by `(A + A^T) / 2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.sub(other).max_abs()
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)] == 0.0))
    }

    pub fn block_diag(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows + b.rows, a.cols + b.cols);
        out.set_block(0, 0, a);
        out.set_block(a.rows, a.cols, b);
        out
    }

    pub fn vstack(a: &Matrix, b: &Matrix) -> Result<Matrix> {
        if a.cols != b.cols {
            return Err(Error::Dimension(format!(
                "cannot stack {} columns on {} columns",
                b.cols, a.cols
            )));
        }
        let mut data = a.data.clone();
        data.extend_from_slice(&b.data);
        Ok(Matrix {
            rows: a.rows + b.rows,
            cols: a.cols,
            data,
        })
    }

    pub fn hstack(a: &Matrix, b: &Matrix) -> Result<Matrix> {
        if a.rows != b.rows {
            return Err(Error::Dimension(format!(
                "cannot place {} rows beside {} rows",
                b.rows, a.rows
            )));
        }
        let mut out = Matrix::zeros(a.rows, a.cols + b.cols);
        out.set_block(0, 0, a);
        out.set_block(0, a.cols, b);
        Ok(out)
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for i in 0..block.rows {
            self.row_mut(r0 + i)[c0..c0 + block.cols].copy_from_slice(block.row(i));
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::new(self)
    }

    /// Eigenvalues (ascending) and eigenvectors (columns) of a symmetric matrix.
    pub fn sym_eigen(&self) -> Result<(Vec<f64>, Matrix)> {
        sym_eigen(self)
    }

    /// Inverse by partially pivoted LU.
    pub fn inverse(&self) -> Result<Matrix> {
        lu_inverse(self)
    }

    /// Smallest eigenvalue of a symmetric matrix.
    pub fn min_sym_eigenvalue(&self) -> Result<f64> {
        Ok(self.sym_eigen()?.0.first().copied().unwrap_or(0.0))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `y += a * x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

/// Lower-triangular Cholesky factor `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "cholesky needs a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)] - dot(&l.row(j)[..j], &l.row(j)[..j]);
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite(format!(
                    "pivot {j} is {d:.3e}"
                )));
            }
            d = libm::sqrt(d);
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows
    }

    /// Solves `L z = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut z = b.to_vec();
        for i in 0..n {
            let s = z[i] - dot(&self.l.row(i)[..i], &z[..i]);
            z[i] = s / self.l[(i, i)];
        }
        z
    }

    /// Solves `L^T x = z`.
    pub fn backward(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(b.rows, b.cols);
        for j in 0..b.cols {
            out.set_col(j, &self.solve_vec(&b.col(j)));
        }
        out
    }

    pub fn inverse(&self) -> Matrix {
        let mut inv = self.solve_mat(&Matrix::identity(self.dim()));
        inv.symmetrize();
        inv
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diag().iter().map(|d| libm::log(*d)).sum::<f64>()
    }

    /// Ratio of largest to smallest pivot, squared; a cheap condition estimate.
    pub fn condition_estimate(&self) -> f64 {
        let d = self.l.diag();
        let max = d.iter().cloned().fold(0.0, f64::max);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        (max / min) * (max / min)
    }
}

fn sym_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "eigen decomposition needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    let mut m = a.clone();
    m.symmetrize();
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if libm::sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

fn lu_inverse(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "inverse needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    let mut lu = a.clone();
    let mut inv = Matrix::identity(n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (piv, pval) = (col..n)
            .map(|r| (r, lu[(r, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval <= 1e-14 * scale {
            return Err(Error::InvalidInput(format!(
                "matrix is singular (pivot {pval:.3e} in column {col})"
            )));
        }
        if piv != col {
            for j in 0..n {
                lu.data.swap(piv * n + j, col * n + j);
                inv.data.swap(piv * n + j, col * n + j);
            }
        }
        let d = lu[(col, col)];
        for j in 0..n {
            lu[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = lu[(r, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                lu[(r, j)] -= f * lu[(col, j)];
                inv[(r, j)] -= f * inv[(col, j)];
            }
        }
    }
    Ok(inv)
}

/// A factor `F` with `F F^T = A` for a symmetric positive semidefinite `A`.
///
/// Uses Cholesky when it succeeds; otherwise falls back to the eigen
/// decomposition with eigenvalues in `[-tol, 0)` clamped to zero.
pub fn psd_factor(a: &Matrix) -> Result<Matrix> {
    if let Ok(c) = a.cholesky() {
        return Ok(c.l);
    }
    let (vals, vecs) = a.sym_eigen()?;
    let scale = vals.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut f = vecs;
    for (j, &lam) in vals.iter().enumerate() {
        if lam < -1e-10 * scale {
            return Err(Error::NegativeEigenvalue { value: lam });
        }
        let s = libm::sqrt(lam.max(0.0));
        for i in 0..f.rows {
            f[(i, j)] *= s;
        }
    }
    Ok(f)
}

/// Checks that a symmetric matrix has no eigenvalue below `-tol`.
pub fn check_psd(a: &Matrix, tol: f64) -> Result<()> {
    let mut shifted = a.clone();
    shifted.add_diag(tol);
    if shifted.cholesky().is_ok() {
        return Ok(());
    }
    let min = a.min_sym_eigenvalue()?;
    if min < -tol {
        Err(Error::NegativeEigenvalue { value: min })
    } else {
        Ok(())
    }
}
