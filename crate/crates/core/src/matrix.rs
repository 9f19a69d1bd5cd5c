//! Dense matrices: a general row-major [`Matrix`] for data and eigenvectors,
//! and [`SymMatrix`], whose mirrored writes keep `a[i][j]` and `a[j][i]`
//! bit-identical.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math;

/// Symmetry tolerance applied when building a [`SymMatrix`] from raw rows.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: rows.len(), cols, data })
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

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: v.len() });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    /// Columns selected by index, in the given order.
    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, idx.len(), |i, j| self.get(i, idx[j]))
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (m, x) in means.iter_mut().zip(self.row(i)) {
                *m += x;
            }
        }
        let n = self.rows as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    pub fn check_finite(&self) -> Result<()> {
        for i in 0..self.rows {
            for j in 0..self.cols {
                if !self.get(i, j).is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| f64::max(m, math::abs(*x)))
    }
}

/// Dense symmetric `p x p` matrix.
///
/// Storage is full and row-major; every write goes to both triangles so the
/// two halves can never drift apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn scaled_identity(dim: usize, value: f64) -> Self {
        Self::from_diag(&vec![value; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.data[i * m.dim + i] = *d;
        }
        m
    }

    /// Builds from the upper triangle: `f` is called for `i <= j` only.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Validates near-symmetry within [`SYMMETRY_TOL`] and averages the two
    /// triangles.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows_with_tol(rows, SYMMETRY_TOL)
    }

    pub fn from_rows_with_tol(rows: &[Vec<f64>], tol: f64) -> Result<Self> {
        let m = Matrix::from_rows(rows)?;
        Self::from_matrix_with_tol(&m, tol)
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        Self::from_matrix_with_tol(m, SYMMETRY_TOL)
    }

    pub fn from_matrix_with_tol(m: &Matrix, tol: f64) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch { expected: m.rows(), found: m.cols() });
        }
        if m.rows() == 0 {
            return Err(invalid("empty matrix"));
        }
        m.check_finite()?;
        let scale = f64::max(1.0, m.max_abs());
        for i in 0..m.rows() {
            for j in (i + 1)..m.cols() {
                let gap = math::abs(m.get(i, j) - m.get(j, i));
                if gap > tol * scale {
                    return Err(Error::NotSymmetric { row: i, col: j, gap });
                }
            }
        }
        Ok(Self::from_upper_fn(m.rows(), |i, j| 0.5 * (m.get(i, j) + m.get(j, i))))
    }

    /// Symmetric part `(A + A^T) / 2` of a square matrix, no tolerance check.
    pub fn symmetric_part(m: &Matrix) -> Self {
        Self::from_upper_fn(m.rows(), |i, j| 0.5 * (m.get(i, j) + m.get(j, i)))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix { rows: self.dim, cols: self.dim, data: self.data.clone() }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> SymMatrix {
        SymMatrix { dim: self.dim, data: self.data.iter().map(|x| f(*x)).collect() }
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        self.map(|x| x * c)
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &SymMatrix, f: impl Fn(f64, f64) -> f64) -> Result<SymMatrix> {
        self.same_dim(other)?;
        Ok(SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn same_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(())
    }

    /// Adds `c` to every diagonal entry.
    pub fn shift_diag(&self, c: f64) -> SymMatrix {
        let mut out = self.clone();
        for i in 0..self.dim {
            out.data[i * self.dim + i] += c;
        }
        out
    }

    pub fn matmul(&self, other: &SymMatrix) -> Result<Matrix> {
        self.same_dim(other)?;
        self.to_matrix().matmul(&other.to_matrix())
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        Ok((0..self.dim).map(|i| dot(self.row(i), v)).collect())
    }

    /// `tr(A B)` for symmetric `A`, `B`, without forming the product.
    pub fn trace_product(&self, other: &SymMatrix) -> Result<f64> {
        self.same_dim(other)?;
        Ok(dot(&self.data, &other.data))
    }

    /// Elementwise maximum absolute value, `||A||_inf`.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| f64::max(m, math::abs(*x)))
    }

    pub fn frobenius(&self) -> f64 {
        math::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    /// Elementwise `||A||_1`, optionally skipping the diagonal.
    pub fn l1_elementwise(&self, include_diagonal: bool) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j || include_diagonal {
                    s += math::abs(self.get(i, j));
                }
            }
        }
        s
    }

    /// Matrix `l1` norm: maximum absolute column sum.
    pub fn matrix_l1(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| math::abs(self.get(i, j))).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_offdiag(&self) -> f64 {
        let mut m = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                m = f64::max(m, math::abs(self.get(i, j)));
            }
        }
        m
    }

    pub fn mean_abs_offdiag(&self) -> f64 {
        if self.dim < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                s += math::abs(self.get(i, j));
            }
        }
        s / (self.dim * (self.dim - 1) / 2) as f64
    }

    /// Number of upper-triangle off-diagonal entries with `|a_ij| > tol`.
    pub fn count_offdiag_nonzero(&self, tol: f64) -> usize {
        let mut c = 0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                if math::abs(self.get(i, j)) > tol {
                    c += 1;
                }
            }
        }
        c
    }

    pub fn check_finite(&self) -> Result<()> {
        for i in 0..self.dim {
            for j in i..self.dim {
                if !self.get(i, j).is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        cholesky(self)
    }

    pub fn is_positive_definite(&self) -> bool {
        cholesky(self).is_ok()
    }
}

#[inline]
/// Inner product with four independent partial sums.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

/// Factors a symmetric positive definite matrix.
///
/// Fails with [`Error::NotPositiveDefinite`] naming the first pivot that is
/// not strictly positive.
pub fn cholesky(a: &SymMatrix) -> Result<Cholesky> {
    let p = a.dim();
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let mut d = a.get(j, j);
        d -= dot(&l[j * p..j * p + j], &l[j * p..j * p + j]);
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = math::sqrt(d);
        l[j * p + j] = ljj;
        for i in (j + 1)..p {
            let s = a.get(i, j) - dot(&l[i * p..i * p + j], &l[j * p..j * p + j]);
            l[i * p + j] = s / ljj;
        }
    }
    Ok(Cholesky { dim: p, l })
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.dim + j]
    }

    pub fn factor(&self) -> Matrix {
        Matrix { rows: self.dim, cols: self.dim, data: self.l.clone() }
    }

    /// `log det A = 2 sum log L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| math::ln(self.l(i, i))).sum::<f64>()
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        let p = self.dim;
        for i in 0..p {
            let s = b[i] - dot(&self.l[i * p..i * p + i], &b[..i]);
            b[i] = s / self.l(i, i);
        }
    }

    /// Solves `L^T x = b` in place.
    pub fn solve_upper(&self, b: &mut [f64]) {
        let p = self.dim;
        for i in (0..p).rev() {
            let mut s = b[i];
            for k in (i + 1)..p {
                s -= self.l(k, i) * b[k];
            }
            b[i] = s / self.l(i, i);
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower(&mut x);
        self.solve_upper(&mut x);
        x
    }

    /// `A^{-1} = L^{-T} L^{-1}`.
    pub fn inverse(&self) -> SymMatrix {
        let p = self.dim;
        // Rows of L^{-1}: x_i = (e_i - sum_{k<i} L_ik x_k) / L_ii.
        let mut linv = vec![0.0; p * p];
        for i in 0..p {
            let (done, rest) = linv.split_at_mut(i * p);
            let row = &mut rest[..p];
            row[i] = 1.0;
            for k in 0..i {
                let c = self.l(i, k);
                if c != 0.0 {
                    axpy(-c, &done[k * p..k * p + k + 1], &mut row[..k + 1]);
                }
            }
            let d = self.l(i, i);
            row[..=i].iter_mut().for_each(|v| *v /= d);
        }
        // (L^{-T} L^{-1})_{ij} = sum_k linv[k][i] linv[k][j], upper part.
        let mut out = vec![0.0; p * p];
        for k in 0..p {
            let xk = &linv[k * p..k * p + k + 1];
            for i in 0..=k {
                axpy(xk[i], &xk[i..], &mut out[i * p + i..i * p + k + 1]);
            }
        }
        for i in 0..p {
            for j in 0..i {
                out[i * p + j] = out[j * p + i];
            }
        }
        SymMatrix { dim: p, data: out }
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

/// `log det A` for positive definite `A`.
pub fn log_det_pd(a: &SymMatrix) -> Result<f64> {
    Ok(cholesky(a)?.log_det())
}

/// Inverse of a positive definite matrix; symmetric by construction.
pub fn invert_pd(a: &SymMatrix) -> Result<SymMatrix> {
    Ok(cholesky(a)?.inverse())
}

/// Sample covariance `S = X_c^T X_c / n` with column-centred `X_c`.
///
/// The divisor is `n`, not `n - 1`.
pub fn sample_covariance(x: &Matrix) -> Result<SymMatrix> {
    let (n, p) = (x.rows(), x.cols());
    if n < 2 {
        return Err(invalid("sample covariance needs at least two rows"));
    }
    if p == 0 {
        return Err(invalid("sample covariance needs at least one column"));
    }
    x.check_finite()?;
    let means = x.column_means();
    let mut acc = vec![0.0; p * p];
    let mut centred = vec![0.0; p];
    for i in 0..n {
        for (c, (v, m)) in centred.iter_mut().zip(x.row(i).iter().zip(&means)) {
            *c = v - m;
        }
        for a in 0..p {
            let ca = centred[a];
            if ca == 0.0 {
                continue;
            }
            let row = &mut acc[a * p..a * p + p];
            for b in a..p {
                row[b] += ca * centred[b];
            }
        }
    }
    let nf = n as f64;
    Ok(SymMatrix::from_upper_fn(p, |i, j| acc[i * p + j] / nf))
}
