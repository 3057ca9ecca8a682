//! Joint truncated-SVD compression of a block group.
//!
//! A group `[A_1, ..., A_k]` is stored as a shared left basis `U_r` (the top-r
//! left singular vectors of the concatenation) plus one `r x n` coefficient
//! matrix `C_i = U_r^T A_i` per block.

use thiserror::Error;

use crate::matrix::{
    check_uniform_shape, concat_h, singular_values, svd, DenseMatrix, MatrixError,
};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompressError {
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("rank {rank} exceeds the maximum {max}")]
    RankTooLarge { rank: usize, max: usize },
    #[error("block index {index} out of range for a group of {k}")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("blocks do not match the compressed group: {0}")]
    PlanMismatch(String),
    #[error("per-block rank list has {found} entries, expected {expected}")]
    RankListLength { expected: usize, found: usize },
    #[error("per-block rank {rank} at index {index} is outside 1..={max}")]
    InvalidBlockRank {
        index: usize,
        rank: usize,
        max: usize,
    },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedGroup<T> {
    /// `m x r`, orthonormal columns; each column's largest-magnitude entry is positive.
    pub basis: DenseMatrix<T>,
    /// One `r x n` matrix per block.
    pub coefficients: Vec<DenseMatrix<T>>,
    pub rank: usize,
    /// `(m, n, k)`.
    pub original_shape: (usize, usize, usize),
}

impl<T: Scalar> CompressedGroup<T> {
    pub fn k(&self) -> usize {
        self.coefficients.len()
    }

    pub fn storage(&self) -> StorageStats {
        let (m, n, k) = self.original_shape;
        let per_block = self.rank.min(m.min(n));
        storage_accounting(m, n, k, self.rank, Some(&vec![per_block; k]))
            .expect("group rank validated at compression")
    }
}

/// Scalar counts for joint versus per-block storage.
///
/// `joint_scalars = r m + k r n` (shared basis plus coefficients) and
/// `separate_scalars = sum_i r_i (m + n + 1)` (a rank-`r_i` truncated SVD per
/// block storing `U`, `V` and the singular values).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageStats {
    pub joint_scalars: u64,
    pub separate_scalars: u64,
    pub ratio: f64,
}

/// Top-`r` left singular vectors of `concat_h(blocks)` and the per-block
/// coefficients.
pub fn compress_group<T: Scalar>(
    blocks: &[DenseMatrix<T>],
    r: usize,
) -> Result<CompressedGroup<T>, CompressError> {
    let (m, n) = check_uniform_shape(blocks)?;
    let k = blocks.len();
    check_rank(r, m, k * n)?;
    let concat = concat_h(blocks)?;
    let factors = svd(&concat)?;
    let basis = normalize_signs(&factors.left_leading(r));
    let coefficients = blocks.iter().map(|b| basis.t_matmul(b)).collect();
    Ok(CompressedGroup {
        basis,
        coefficients,
        rank: r,
        original_shape: (m, n, k),
    })
}

fn check_rank(r: usize, m: usize, cols: usize) -> Result<(), CompressError> {
    if r == 0 {
        return Err(CompressError::ZeroRank);
    }
    let max = m.min(cols);
    if r > max {
        return Err(CompressError::RankTooLarge { rank: r, max });
    }
    Ok(())
}

/// Flips each column so that its largest-magnitude entry (first one on ties) is positive.
fn normalize_signs<T: Scalar>(u: &DenseMatrix<T>) -> DenseMatrix<T> {
    let signs: Vec<T> = (0..u.cols())
        .map(|j| {
            let mut pivot = T::zero();
            for i in 0..u.rows() {
                let x = u.get(i, j);
                if x.abs() > pivot.abs() {
                    pivot = x;
                }
            }
            if pivot < T::zero() {
                -T::one()
            } else {
                T::one()
            }
        })
        .collect();
    DenseMatrix::from_fn(u.rows(), u.cols(), |i, j| u.get(i, j) * signs[j])
}

/// `basis * coefficients[i]`.
pub fn reconstruct_block<T: Scalar>(
    group: &CompressedGroup<T>,
    i: usize,
) -> Result<DenseMatrix<T>, CompressError> {
    let c = group
        .coefficients
        .get(i)
        .ok_or(CompressError::IndexOutOfRange {
            index: i,
            k: group.k(),
        })?;
    Ok(group.basis.matmul(c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionError<T> {
    /// `||A_i - U_r C_i||_2` per block.
    pub per_block: Vec<T>,
    /// `||M - U_r U_r^T M||_2`, equal to `sigma_{r+1}(M)` (zero at full rank).
    pub concatenated: T,
}

pub fn group_reconstruction_error<T: Scalar>(
    group: &CompressedGroup<T>,
    blocks: &[DenseMatrix<T>],
) -> Result<ReconstructionError<T>, CompressError> {
    let (m, n, k) = group.original_shape;
    if blocks.len() != k {
        return Err(CompressError::PlanMismatch(format!(
            "group holds {k} blocks, {} supplied",
            blocks.len()
        )));
    }
    if let Some((i, b)) = blocks.iter().enumerate().find(|(_, b)| b.shape() != (m, n)) {
        return Err(CompressError::PlanMismatch(format!(
            "block {i} has shape {:?}, group stores {m}x{n}",
            b.shape()
        )));
    }
    let mut residuals = Vec::with_capacity(k);
    let mut per_block = Vec::with_capacity(k);
    for (i, b) in blocks.iter().enumerate() {
        let residual = b.sub(&reconstruct_block(group, i)?);
        per_block.push(top_singular_value(&residual)?);
        residuals.push(residual);
    }
    let concatenated = top_singular_value(&concat_h(&residuals)?)?;
    Ok(ReconstructionError {
        per_block,
        concatenated,
    })
}

fn top_singular_value<T: Scalar>(a: &DenseMatrix<T>) -> Result<T, MatrixError> {
    Ok(singular_values(a)?[0])
}

/// Joint versus separate storage for `k` blocks of size `m x n`.
///
/// `per_block_ranks` defaults to `r_joint` for every block.
pub fn storage_accounting(
    m: usize,
    n: usize,
    k: usize,
    r_joint: usize,
    per_block_ranks: Option<&[usize]>,
) -> Result<StorageStats, CompressError> {
    if m == 0 || n == 0 || k == 0 {
        return Err(CompressError::PlanMismatch(format!(
            "dimensions must be positive, got m={m} n={n} k={k}"
        )));
    }
    check_rank(r_joint, m, k * n)?;
    let defaults;
    let ranks = match per_block_ranks {
        Some(r) => r,
        None => {
            defaults = vec![r_joint; k];
            &defaults
        }
    };
    if ranks.len() != k {
        return Err(CompressError::RankListLength {
            expected: k,
            found: ranks.len(),
        });
    }
    let block_max = m.min(n);
    if let Some((index, &rank)) = ranks
        .iter()
        .enumerate()
        .find(|(_, &r)| r == 0 || r > block_max)
    {
        return Err(CompressError::InvalidBlockRank {
            index,
            rank,
            max: block_max,
        });
    }
    let (m, n, k, r) = (m as u64, n as u64, k as u64, r_joint as u64);
    let joint_scalars = r * m + k * r * n;
    let separate_scalars: u64 = ranks.iter().map(|&ri| ri as u64 * (m + n + 1)).sum();
    Ok(StorageStats {
        joint_scalars,
        separate_scalars,
        ratio: joint_scalars as f64 / separate_scalars as f64,
    })
}
