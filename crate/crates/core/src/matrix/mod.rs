//! Dense real matrices and the spectral operations built on them.

mod svd;

pub(crate) use svd::check_spectrum;

use std::fmt;

use thiserror::Error;

use crate::Scalar;

pub use svd::{
    numerical_rank, replicated_spectrum, singular_values, spectral_norm, svd, SvdFactors,
    POWER_ITERATION_CAP, POWER_ITERATION_THRESHOLD, POWER_ITERATION_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
    #[error("expected {expected} entries for the declared shape, got {found}")]
    EntryCount { expected: usize, found: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("cannot concatenate an empty block list")]
    EmptyBlockList,
    #[error("block {index} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        index: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("SVD did not converge after {iterations} sweeps")]
    ConvergenceFailure { iterations: usize },
    #[error("spectrum is not a nonincreasing sequence of nonnegative values (first offending index {index})")]
    UnsortedSpectrum { index: usize },
    #[error("replication count k must be at least 1")]
    ZeroK,
}

/// Row-major dense real matrix with positive dimensions and finite entries.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, MatrixError> {
        if rows == 0 || cols == 0 {
            return Err(MatrixError::EmptyShape { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(MatrixError::EntryCount {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self, MatrixError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(MatrixError::ShapeMismatch {
                    index: i,
                    expected: (1, ncols),
                    found: (1, r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(nrows, ncols, data)
    }

    /// Panics if `f` produces a non-finite value or a dimension is zero.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_row_major(rows, cols, data).expect("from_fn: invalid matrix")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| T::zero())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    /// Rectangular `rows x cols` matrix with `diag` on its main diagonal.
    pub fn from_diag(rows: usize, cols: usize, diag: &[T]) -> Self {
        Self::from_fn(rows, cols, |i, j| {
            if i == j && i < diag.len() {
                diag[i]
            } else {
                T::zero()
            }
        })
    }

    /// Builds from column-major storage.
    pub fn from_col_major(rows: usize, cols: usize, data: &[T]) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::EntryCount {
                expected: rows * cols,
                found: data.len(),
            });
        }
        let mut row_major = Vec::with_capacity(data.len());
        for i in 0..rows {
            for j in 0..cols {
                row_major.push(data[j * rows + i]);
            }
        }
        Self::from_row_major(rows, cols, row_major)
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_col_major(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Matrix product; panics on inner-dimension mismatch.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut data = vec![T::zero(); self.rows * rhs.cols];
        for i in 0..self.rows {
            let out = &mut data[i * rhs.cols..(i + 1) * rhs.cols];
            for (l, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out.iter_mut().zip(rhs.row(l)) {
                    *o += a * b;
                }
            }
        }
        Self {
            rows: self.rows,
            cols: rhs.cols,
            data,
        }
    }

    /// `self^T * rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "t_matmul: row counts differ");
        let mut data = vec![T::zero(); self.cols * rhs.cols];
        for l in 0..self.rows {
            let a_row = self.row(l);
            let b_row = rhs.row(l);
            for (i, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let out = &mut data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Self {
            rows: self.cols,
            cols: rhs.cols,
            data,
        }
    }

    /// `self * self^T`.
    pub fn gram_left(&self) -> Self {
        self.matmul(&self.transpose())
    }

    /// `self^T * self`.
    pub fn gram_right(&self) -> Self {
        self.t_matmul(self)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(
            self.shape(),
            rhs.shape(),
            "elementwise op on different shapes"
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        assert!(
            start < end && end <= self.cols,
            "column range out of bounds"
        );
        Self::from_fn(self.rows, end - start, |i, j| self.get(i, start + j))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == T::zero())
    }

    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::lit(x.as_f64())).collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for row in self.data.chunks(self.cols.max(1)) {
            writeln!(f, "  {row:?}")?;
        }
        write!(f, "]")
    }
}

/// Horizontal concatenation `[A_1, A_2, ..., A_k]` in input order.
pub fn concat_h<T: Scalar>(blocks: &[DenseMatrix<T>]) -> Result<DenseMatrix<T>, MatrixError> {
    let first = blocks.first().ok_or(MatrixError::EmptyBlockList)?;
    let rows = first.rows;
    for (index, b) in blocks.iter().enumerate() {
        if b.rows != rows {
            return Err(MatrixError::ShapeMismatch {
                index,
                expected: (rows, b.cols),
                found: b.shape(),
            });
        }
    }
    let cols: usize = blocks.iter().map(|b| b.cols).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for b in blocks {
            data.extend_from_slice(b.row(i));
        }
    }
    Ok(DenseMatrix { rows, cols, data })
}

/// Checks that every block has the shape of the first one.
pub fn check_uniform_shape<T: Scalar>(
    blocks: &[DenseMatrix<T>],
) -> Result<(usize, usize), MatrixError> {
    let first = blocks.first().ok_or(MatrixError::EmptyBlockList)?;
    let shape = first.shape();
    for (index, b) in blocks.iter().enumerate() {
        if b.shape() != shape {
            return Err(MatrixError::ShapeMismatch {
                index,
                expected: shape,
                found: b.shape(),
            });
        }
    }
    Ok(shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = DenseMatrix<f64>;

    #[test]
    fn rejects_bad_construction() {
        assert_eq!(
            M::from_row_major(0, 2, vec![]),
            Err(MatrixError::EmptyShape { rows: 0, cols: 2 })
        );
        assert!(matches!(
            M::from_row_major(2, 2, vec![1.0; 3]),
            Err(MatrixError::EntryCount {
                expected: 4,
                found: 3
            })
        ));
        assert_eq!(
            M::from_row_major(2, 2, vec![1.0, 2.0, f64::NAN, 0.0]),
            Err(MatrixError::NonFinite { row: 1, col: 0 })
        );
        assert!(M::from_row_major(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn concat_two_identities() {
        let i2 = M::identity(2);
        let m = concat_h(&[i2.clone(), i2]).unwrap();
        assert_eq!(m.shape(), (2, 4));
        assert_eq!(m.row(0), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(m.row(1), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn concat_single_block_is_identity_op() {
        let a = M::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        assert_eq!(concat_h(std::slice::from_ref(&a)).unwrap(), a);
    }

    #[test]
    fn concat_mixed_widths_keeps_column_order() {
        let a = M::from_fn(2, 2, |i, j| (10 * i + j) as f64);
        let b = M::from_fn(2, 3, |i, j| (100 + 10 * i + j) as f64);
        let c = M::from_fn(2, 1, |i, _| (200 + i) as f64);
        let m = concat_h(&[a, b.clone(), c]).unwrap();
        assert_eq!(m.shape(), (2, 6));
        // column 4 (1-based) is column 2 of the second block
        assert_eq!(m.column(3), b.column(1));
    }

    #[test]
    fn concat_errors() {
        assert_eq!(concat_h::<f64>(&[]), Err(MatrixError::EmptyBlockList));
        let err = concat_h(&[M::zeros(2, 2), M::zeros(3, 2)]).unwrap_err();
        assert_eq!(
            err,
            MatrixError::ShapeMismatch {
                index: 1,
                expected: (2, 2),
                found: (3, 2)
            }
        );
    }

    #[test]
    fn products_agree() {
        let a = M::from_fn(3, 4, |i, j| (i as f64) - 0.5 * (j as f64));
        let b = M::from_fn(3, 2, |i, j| 1.0 + (i * j) as f64);
        assert_eq!(a.t_matmul(&b), a.transpose().matmul(&b));
        assert_eq!(a.gram_right(), a.transpose().matmul(&a));
    }

    #[test]
    fn col_major_roundtrip() {
        let a = M::from_fn(3, 2, |i, j| (i * 7 + j) as f64);
        assert_eq!(M::from_col_major(3, 2, &a.to_col_major()).unwrap(), a);
    }
}
