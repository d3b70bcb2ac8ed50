//! Dense column-major matrices and the Householder QR behind every fit.
//!
//! The QR is computed column by column in the caller's order. A column whose
//! remaining norm falls to `tol * |r_11|` or below is treated as a linear
//! combination of the columns before it and is skipped, so the first of two
//! duplicated columns is always the one kept.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![T::zero(); nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                data.push(f(i, j));
            }
        }
        Self { nrows, ncols, data }
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns<C: AsRef<[T]>>(columns: &[C]) -> Result<Self> {
        let nrows = columns.first().map_or(0, |c| c.as_ref().len());
        let mut data = Vec::with_capacity(nrows * columns.len());
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != nrows {
                return Err(Error::Dimension(format!(
                    "column {j} has {} rows, expected {nrows}",
                    c.len()
                )));
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            nrows,
            ncols: columns.len(),
            data,
        })
    }

    /// Builds a matrix from a row-major slice.
    pub fn from_row_slice(nrows: usize, ncols: usize, values: &[T]) -> Result<Self> {
        if values.len() != nrows * ncols {
            return Err(Error::Dimension(format!(
                "{} values for a {nrows}x{ncols} matrix",
                values.len()
            )));
        }
        Ok(Self::from_fn(nrows, ncols, |i, j| values[i * ncols + j]))
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[j * self.nrows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[j * self.nrows + i] = v;
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[T] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn column_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[T]> {
        (0..self.ncols).map(move |j| self.column(j))
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        (0..self.ncols).map(|j| self.get(i, j)).collect()
    }

    pub fn push_column(&mut self, column: &[T]) -> Result<()> {
        if self.ncols > 0 && column.len() != self.nrows {
            return Err(Error::Dimension(format!(
                "appending a column of {} rows to a matrix with {} rows",
                column.len(),
                self.nrows
            )));
        }
        if self.ncols == 0 {
            self.nrows = column.len();
        }
        self.data.extend_from_slice(column);
        self.ncols += 1;
        Ok(())
    }

    /// `[self, other]`.
    pub fn hstack(&self, other: &Matrix<T>) -> Result<Self> {
        if self.ncols > 0 && other.ncols > 0 && self.nrows != other.nrows {
            return Err(Error::Dimension(format!(
                "hstack of {} and {} rows",
                self.nrows, other.nrows
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            nrows: self.nrows.max(other.nrows),
            ncols: self.ncols + other.ncols,
            data,
        })
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.nrows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.column(j));
        }
        Self {
            nrows: self.nrows,
            ncols: idx.len(),
            data,
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), self.ncols, |i, j| self.get(idx[i], j))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self.get(j, i))
    }

    /// `A v`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.ncols);
        let mut out = vec![T::zero(); self.nrows];
        for (j, &vj) in v.iter().enumerate() {
            if vj == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.column(j)) {
                *o = *o + a * vj;
            }
        }
        out
    }

    /// `A' v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.nrows);
        self.columns().map(|c| dot(c, v)).collect()
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::Dimension(format!(
                "{}x{} times {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut out = Self::zeros(self.nrows, other.ncols);
        for j in 0..other.ncols {
            let col = self.mul_vec(other.column(j));
            out.column_mut(j).copy_from_slice(&col);
        }
        Ok(out)
    }

    /// `A' B`.
    pub fn tr_matmul(&self, other: &Matrix<T>) -> Result<Self> {
        if self.nrows != other.nrows {
            return Err(Error::Dimension(format!(
                "({}x{})' times {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        Ok(Self::from_fn(self.ncols, other.ncols, |i, j| {
            dot(self.column(i), other.column(j))
        }))
    }

    /// `A' A`.
    pub fn gram(&self) -> Self {
        let k = self.ncols;
        let mut out = Self::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = dot(self.column(i), self.column(j));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    /// Multiplies row `i` by `s[i]`.
    pub fn scale_rows(&self, s: &[T]) -> Self {
        let mut out = self.clone();
        for j in 0..self.ncols {
            for (a, &si) in out.column_mut(j).iter_mut().zip(s) {
                *a = *a * si;
            }
        }
        out
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|&a| a * c).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    pub fn trace(&self) -> T {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), idx.len(), |i, j| self.get(idx[i], idx[j]))
    }

    /// `(A + A') / 2`.
    pub fn symmetrize(&mut self) {
        let two = T::one() + T::one();
        for i in 0..self.nrows {
            for j in 0..i {
                let v = (self.get(i, j) + self.get(j, i)) / two;
                self.set(i, j, v);
                self.set(j, i, v);
            }
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn mean<T: Scalar>(v: &[T]) -> T {
    if v.is_empty() {
        return T::nan();
    }
    v.iter().copied().sum::<T>() / T::of(v.len() as f64)
}

pub fn weighted_mean<T: Scalar>(v: &[T], w: &[T]) -> T {
    let sw: T = w.iter().copied().sum();
    dot(v, w) / sw
}

/// Householder QR with sequential collinearity pruning.
#[derive(Debug, Clone)]
pub struct Qr<T> {
    /// Working copy: for kept column `kept[s]`, rows `0..s` hold `R[.., s]`
    /// and rows below `s` hold the Householder vector (implicit leading 1).
    work: Matrix<T>,
    tau: Vec<T>,
    r_diag: Vec<T>,
    kept: Vec<usize>,
    dropped: Vec<usize>,
}

impl<T: Scalar> Qr<T> {
    /// Factors `a`, dropping columns with `|r_jj| <= rel_tol * |r_11|`.
    pub fn decompose(a: &Matrix<T>, rel_tol: T) -> Self {
        let m = a.nrows();
        let n = a.ncols();
        let mut work = a.clone();
        let mut tau = Vec::new();
        let mut r_diag = Vec::new();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        let mut reference: Option<T> = None;

        for j in 0..n {
            let r = kept.len();
            if r >= m {
                dropped.push(j);
                continue;
            }
            let col = work.column(j);
            let norm = col[r..].iter().fold(T::zero(), |acc, &x| acc.hypot(x));
            let keep = match reference {
                None => norm > T::zero(),
                Some(r11) => norm > rel_tol * r11,
            };
            if !keep {
                dropped.push(j);
                continue;
            }
            if reference.is_none() {
                reference = Some(norm);
            }

            let x0 = col[r];
            let beta = if x0 >= T::zero() { -norm } else { norm };
            let v0 = x0 - beta;
            let t = (beta - x0) / beta;
            {
                let colm = work.column_mut(j);
                colm[r] = beta;
                for x in colm[r + 1..].iter_mut() {
                    *x = *x / v0;
                }
            }
            // Apply H = I - t v v' to the remaining columns.
            let (left, right) = work.data.split_at_mut((j + 1) * m);
            let v_tail = &left[j * m + r + 1..j * m + m];
            for c in right.chunks_mut(m) {
                let seg = &mut c[r..];
                let s = seg[0] + dot(v_tail, &seg[1..]);
                let ts = t * s;
                seg[0] = seg[0] - ts;
                for (x, &v) in seg[1..].iter_mut().zip(v_tail) {
                    *x = *x - ts * v;
                }
            }
            tau.push(t);
            r_diag.push(beta);
            kept.push(j);
        }

        Self {
            work,
            tau,
            r_diag,
            kept,
            dropped,
        }
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    /// Original indices of the columns retained in the factorization.
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// Original indices of the columns pruned as collinear.
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn r_diagonal(&self) -> &[T] {
        &self.r_diag
    }

    /// Upper-triangular `R` (rank x rank) over the kept columns.
    pub fn r(&self) -> Matrix<T> {
        let k = self.rank();
        let mut out = Matrix::zeros(k, k);
        for (s, &j) in self.kept.iter().enumerate() {
            let col = self.work.column(j);
            for i in 0..s {
                out.set(i, s, col[i]);
            }
            out.set(s, s, self.r_diag[s]);
        }
        out
    }

    /// `Q' b`.
    pub fn qt_mul(&self, b: &[T]) -> Vec<T> {
        let m = self.work.nrows();
        let mut out = b.to_vec();
        for (s, &j) in self.kept.iter().enumerate() {
            let v_tail = &self.work.column(j)[s + 1..m];
            let seg = &mut out[s..];
            let dotv = seg[0] + dot(v_tail, &seg[1..]);
            let ts = self.tau[s] * dotv;
            seg[0] = seg[0] - ts;
            for (x, &v) in seg[1..].iter_mut().zip(v_tail) {
                *x = *x - ts * v;
            }
        }
        out
    }

    /// Least-squares coefficients for the kept columns.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let qtb = self.qt_mul(b);
        back_substitute(&self.r(), &qtb[..self.rank()])
    }

    /// `R^{-1}`.
    pub fn r_inverse(&self) -> Matrix<T> {
        upper_triangular_inverse(&self.r())
    }

    /// `(A'A)^{-1} = R^{-1} R^{-T}` over the kept columns.
    pub fn gram_inverse(&self) -> Matrix<T> {
        let ri = self.r_inverse();
        let k = ri.nrows();
        let mut out = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                // rows i and j of R^{-1}; R^{-1} is upper triangular
                let mut s = T::zero();
                for l in i.max(j)..k {
                    s = s + ri.get(i, l) * ri.get(j, l);
                }
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        out
    }
}

/// Solves `R x = b` for upper-triangular `R`.
pub fn back_substitute<T: Scalar>(r: &Matrix<T>, b: &[T]) -> Vec<T> {
    let k = r.ncols();
    let mut x = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = b[i];
        for l in i + 1..k {
            s = s - r.get(i, l) * x[l];
        }
        x[i] = s / r.get(i, i);
    }
    x
}

pub fn upper_triangular_inverse<T: Scalar>(r: &Matrix<T>) -> Matrix<T> {
    let k = r.ncols();
    let mut inv = Matrix::zeros(k, k);
    for j in 0..k {
        let mut e = vec![T::zero(); k];
        e[j] = T::one();
        let col = back_substitute(r, &e);
        inv.column_mut(j).copy_from_slice(&col);
    }
    inv
}

/// Lower Cholesky factor of a symmetric positive-definite matrix, or `None`
/// when a pivot is not above `rel_tol` (relative to a unit diagonal).
fn cholesky_unit_scaled<T: Scalar>(a: &Matrix<T>, rel_tol: T) -> Option<Matrix<T>> {
    let n = a.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for p in 0..j {
            d = d - l.get(j, p) * l.get(j, p);
        }
        if !(d > rel_tol) {
            return None;
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for p in 0..j {
                s = s - l.get(i, p) * l.get(j, p);
            }
            l.set(i, j, s / djj);
        }
    }
    Some(l)
}

/// Inverse of a symmetric positive-definite matrix.
///
/// The matrix is first scaled to unit diagonal; a Cholesky pivot at or below
/// `rel_tol` on that scale is reported as singular.
pub fn spd_inverse<T: Scalar>(a: &Matrix<T>, rel_tol: T, what: &str) -> Result<Matrix<T>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension(format!("{what}: not square")));
    }
    let mut scale = Vec::with_capacity(n);
    for i in 0..n {
        let d = a.get(i, i);
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::Singular(format!("{what}: non-positive diagonal entry {i}")));
        }
        scale.push(d.sqrt());
    }
    let c = Matrix::from_fn(n, n, |i, j| a.get(i, j) / (scale[i] * scale[j]));
    let l = cholesky_unit_scaled(&c, rel_tol)
        .ok_or_else(|| Error::Singular(format!("{what}: not positive definite")))?;
    // C^{-1} = L^{-T} L^{-1}
    let lt = l.transpose();
    let lt_inv = upper_triangular_inverse(&lt);
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = T::zero();
            for p in i.max(j)..n {
                s = s + lt_inv.get(i, p) * lt_inv.get(j, p);
            }
            let v = s / (scale[i] * scale[j]);
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    Ok(out)
}

/// Quadratic form `b' A^{-1} b` for symmetric positive-definite `A`.
pub fn spd_quadratic_form<T: Scalar>(a: &Matrix<T>, b: &[T], rel_tol: T, what: &str) -> Result<T> {
    let inv = spd_inverse(a, rel_tol, what)?;
    Ok(dot(b, &inv.mul_vec(b)))
}
