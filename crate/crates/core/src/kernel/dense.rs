use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::KernelError;
use crate::scalar::Real;

/// Dense column-major block. Zero columns are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseBlock<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseBlock<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = T::one();
        }
        out
    }

    /// First `cols` columns of the `rows`-dimensional identity.
    pub fn eye(rows: usize, cols: usize) -> Self {
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            out[(i, i)] = T::one();
        }
        out
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, KernelError> {
        if data.len() != rows * cols {
            return Err(KernelError::DimensionMismatch {
                op: "from_col_major",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a block from a row-major slice.
    pub fn from_row_major(rows: usize, cols: usize, data: &[T]) -> Result<Self, KernelError> {
        if data.len() != rows * cols {
            return Err(KernelError::DimensionMismatch {
                op: "from_row_major",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self::from_fn(rows, cols, |i, j| data[i * cols + j]))
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<T>]) -> Result<Self, KernelError> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            if c.len() != rows {
                return Err(KernelError::DimensionMismatch {
                    op: "from_columns",
                    expected: rows,
                    found: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(Self { rows, cols: columns.len(), data })
    }

    /// Block of independent standard normal entries drawn column by column.
    pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        Self::from_fn(rows, cols, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.cols == 0 || self.rows == 0
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn push_col(&mut self, col: &[T]) {
        assert_eq!(col.len(), self.rows, "column length mismatch");
        self.data.extend_from_slice(col);
        self.cols += 1;
    }

    /// Copy of the columns in `range`.
    pub fn columns(&self, range: Range<usize>) -> Self {
        let data = self.data[range.start * self.rows..range.end * self.rows].to_vec();
        Self { rows: self.rows, cols: range.len(), data }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Self { rows: self.rows, cols: idx.len(), data }
    }

    /// Copy of the rows in `range`.
    pub fn row_block(&self, range: Range<usize>) -> Self {
        Self::from_fn(range.len(), self.cols, |i, j| self[(range.start + i, j)])
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn hcat(&self, other: &Self) -> Result<Self, KernelError> {
        if self.rows != other.rows {
            return Err(KernelError::DimensionMismatch {
                op: "hcat",
                expected: self.rows,
                found: other.rows,
            });
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self { rows: self.rows, cols: self.cols + other.cols, data })
    }

    pub fn hcat_all(rows: usize, blocks: &[&Self]) -> Result<Self, KernelError> {
        let mut out = Self::zeros(rows, 0);
        for b in blocks {
            out = out.hcat(b)?;
        }
        Ok(out)
    }

    /// Vertical concatenation `[self; other]`.
    pub fn vcat(&self, other: &Self) -> Result<Self, KernelError> {
        if self.cols != other.cols {
            return Err(KernelError::DimensionMismatch {
                op: "vcat",
                expected: self.cols,
                found: other.cols,
            });
        }
        let rows = self.rows + other.rows;
        Ok(Self::from_fn(rows, self.cols, |i, j| {
            if i < self.rows {
                self[(i, j)]
            } else {
                other[(i - self.rows, j)]
            }
        }))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `selfᵀ · b`.
    pub fn gemm_tn(&self, b: &Self) -> Result<Self, KernelError> {
        if self.rows != b.rows {
            return Err(KernelError::DimensionMismatch {
                op: "gemm_tn",
                expected: self.rows,
                found: b.rows,
            });
        }
        Ok(Self::from_fn(self.cols, b.cols, |i, j| dot(self.col(i), b.col(j))))
    }

    /// `self · b`.
    pub fn gemm_nn(&self, b: &Self) -> Result<Self, KernelError> {
        if self.cols != b.rows {
            return Err(KernelError::DimensionMismatch {
                op: "gemm_nn",
                expected: self.cols,
                found: b.rows,
            });
        }
        let mut out = Self::zeros(self.rows, b.cols);
        for j in 0..b.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for p in 0..self.cols {
                let s = b[(p, j)];
                if s != T::zero() {
                    axpy(s, self.col(p), dst);
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * s).collect() }
    }

    /// Multiplies column `j` by `d[j]`.
    pub fn scale_cols(&self, d: &[T]) -> Self {
        let mut out = self.clone();
        for (j, &s) in d.iter().enumerate().take(self.cols) {
            for v in out.col_mut(j) {
                *v = *v * s;
            }
        }
        out
    }

    /// Multiplies row `i` by `d[i]`.
    pub fn scale_rows(&self, d: &[T]) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * d[i])
    }

    pub fn add(&self, other: &Self) -> Result<Self, KernelError> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, KernelError> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &Self,
        op: &'static str,
        f: impl Fn(T, T) -> T,
    ) -> Result<Self, KernelError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(KernelError::DimensionMismatch {
                op,
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn col_norm(&self, j: usize) -> T {
        norm(self.col(j))
    }

    pub fn col_norms(&self) -> Vec<T> {
        (0..self.cols).map(|j| self.col_norm(j)).collect()
    }

    pub fn frobenius(&self) -> T {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Spectral norm via the eigenvalues of the smaller Gram matrix.
    pub fn norm2(&self) -> T {
        if self.is_empty() {
            return T::zero();
        }
        let scale = self.max_abs();
        if scale == T::zero() {
            return T::zero();
        }
        let s = self.scale(T::one() / scale);
        let gram = if s.cols <= s.rows {
            s.gemm_tn(&s).expect("square gram")
        } else {
            let t = s.transpose();
            t.gemm_tn(&t).expect("square gram")
        };
        match super::sym_eig_small(&gram) {
            Ok((vals, _)) => vals.last().copied().unwrap_or_else(T::zero).max(T::zero()).sqrt() * scale,
            Err(_) => T::nan(),
        }
    }

    /// `‖selfᵀself − I‖_max`, a cheap orthonormality gauge.
    pub fn orthonormality_error(&self) -> T {
        let g = self.gemm_tn(self).expect("square gram");
        let mut worst = T::zero();
        for j in 0..g.cols {
            for i in 0..g.rows {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Flips column signs so that the largest-magnitude entry of every column
    /// is positive. The first such entry wins on ties.
    pub fn normalize_signs(&self) -> Self {
        let mut out = self.clone();
        for j in 0..self.cols {
            let col = out.col_mut(j);
            let mut best = 0;
            for (i, v) in col.iter().enumerate() {
                if v.abs() > col[best].abs() {
                    best = i;
                }
            }
            if !col.is_empty() && col[best] < T::zero() {
                for v in col.iter_mut() {
                    *v = -*v;
                }
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> DenseBlock<U> {
        DenseBlock {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseBlock<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseBlock<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `y += s·x`.
#[inline]
pub fn axpy<T: Real>(s: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + s * xi;
    }
}
