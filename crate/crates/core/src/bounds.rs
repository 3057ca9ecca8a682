//! Closed-form perturbation bounds for concatenated matrices.
//!
//! Every function here is pure arithmetic over block-norm summaries: the
//! spectral norms `a_j = ||A_j||_2` of the unperturbed blocks and
//! `e_j = ||E_j||_2` of their perturbations. Nothing in this module touches a
//! matrix, which keeps the bounds independent of the SVD oracles that certify
//! them.

use thiserror::Error;

use crate::matrix::{check_spectrum, MatrixError};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("block norm sequences must be nonempty")]
    EmptyNorms,
    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("norm at index {index} is negative or non-finite")]
    InvalidNorm { index: usize },
    #[error("block norm grid is {rows}x{cols}, expected square")]
    NonSquareGrid { rows: usize, cols: usize },
    #[error("sigma_{rank} is zero, contradicting the declared rank {rank}")]
    ZeroSigmaAtRank { rank: usize },
    #[error("declared rank {rank} exceeds spectrum length {len}")]
    RankExceedsSpectrum { rank: usize, len: usize },
    #[error("tolerance must be positive")]
    NonpositiveTau,
    #[error("sigma must be positive")]
    NonpositiveSigma,
    #[error("block count k must be at least {min}")]
    BlockCountTooSmall { min: usize },
    #[error("perturbation size must be positive")]
    NonpositiveEps,
    #[error(transparent)]
    Spectrum(#[from] MatrixError),
}

/// Spectral norms of the blocks `A_j` and of their perturbations `E_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockNorms<T> {
    base_norms: Vec<T>,
    pert_norms: Vec<T>,
}

impl<T: Scalar> BlockNorms<T> {
    pub fn new(base_norms: Vec<T>, pert_norms: Vec<T>) -> Result<Self, BoundsError> {
        if base_norms.is_empty() {
            return Err(BoundsError::EmptyNorms);
        }
        if base_norms.len() != pert_norms.len() {
            return Err(BoundsError::LengthMismatch {
                expected: base_norms.len(),
                found: pert_norms.len(),
            });
        }
        check_norms(&base_norms)?;
        check_norms(&pert_norms)?;
        Ok(Self {
            base_norms,
            pert_norms,
        })
    }

    pub fn k(&self) -> usize {
        self.base_norms.len()
    }

    pub fn base_norms(&self) -> &[T] {
        &self.base_norms
    }

    pub fn pert_norms(&self) -> &[T] {
        &self.pert_norms
    }

    fn pairs(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.base_norms
            .iter()
            .copied()
            .zip(self.pert_norms.iter().copied())
    }
}

fn check_norms<T: Scalar>(v: &[T]) -> Result<(), BoundsError> {
    match v.iter().position(|&x| !x.is_finite() || x < T::zero()) {
        Some(index) => Err(BoundsError::InvalidNorm { index }),
        None => Ok(()),
    }
}

/// All bound values for one block collection.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupBoundReport<T> {
    pub k: usize,
    /// Bound on `||M~^T M~ - M^T M||_2` (squared-sigma units).
    pub gram_right: T,
    /// Bound on `||M~ M~^T - M M^T||_2` (squared-sigma units).
    pub gram_left: T,
    /// Bound on `|sigma_i(M~) - sigma_i(M)|` for `i = 1..=rank_used`.
    pub nonzero_index_bounds: Vec<T>,
    /// Bound on `sigma_i(M~)` for every `i > rank_used`.
    pub zero_index_bound: T,
    pub rank_used: usize,
}

/// `sqrt(sum_ij grid_ij^2)`, an upper bound on the spectral norm of a block
/// matrix whose `(i, j)` block has spectral norm `grid[i][j]`.
pub fn block_norm_bound<T: Scalar, R: AsRef<[T]>>(grid: &[R]) -> Result<T, BoundsError> {
    let k = grid.len();
    let mut acc = T::zero();
    for (i, row) in grid.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != k {
            return Err(BoundsError::NonSquareGrid {
                rows: k,
                cols: row.len(),
            });
        }
        if let Some(j) = row.iter().position(|&x| !x.is_finite() || x < T::zero()) {
            return Err(BoundsError::InvalidNorm { index: i * k + j });
        }
        acc += row.iter().map(|&x| x * x).sum::<T>();
    }
    Ok(acc.sqrt())
}

/// Bound on `||M~^T M~ - M^T M||_2`:
/// `sqrt( sum_i sum_j (a_i e_j + e_i a_j + e_i e_j)^2 )`.
pub fn gram_right_bound<T: Scalar>(norms: &BlockNorms<T>) -> T {
    let mut acc = T::zero();
    for (ai, ei) in norms.pairs() {
        for (aj, ej) in norms.pairs() {
            let d = ai * ej + ei * aj + ei * ej;
            acc += d * d;
        }
    }
    acc.sqrt()
}

/// Bound on `||M~ M~^T - M M^T||_2`: `sum_i (2 a_i e_i + e_i^2)`.
///
/// Only the diagonal (same-block) terms appear, so this never exceeds
/// [`gram_right_bound`].
pub fn gram_left_bound<T: Scalar>(norms: &BlockNorms<T>) -> T {
    norms.pairs().map(|(a, e)| block_term(a, e)).sum()
}

#[inline]
fn block_term<T: Scalar>(a: T, e: T) -> T {
    (a + a) * e + e * e
}

/// Per-index singular value deviation bounds for `M~ = M + E`.
///
/// For `i <= rank`: `|sigma_i(M~) - sigma_i(M)| <= gram_left / sigma_i(M)`;
/// for `i > rank`: `sigma_i(M~) <= sqrt(gram_left)`.
pub fn sv_deviation_bounds<T: Scalar>(
    norms: &BlockNorms<T>,
    sv_of_m: &[T],
    rank: usize,
) -> Result<GroupBoundReport<T>, BoundsError> {
    check_spectrum(sv_of_m)?;
    check_rank(sv_of_m, rank)?;
    let gram_left = gram_left_bound(norms);
    Ok(GroupBoundReport {
        k: norms.k(),
        gram_right: gram_right_bound(norms),
        gram_left,
        nonzero_index_bounds: sv_of_m[..rank].iter().map(|&s| gram_left / s).collect(),
        zero_index_bound: gram_left.sqrt(),
        rank_used: rank,
    })
}

fn check_rank<T: Scalar>(sv: &[T], rank: usize) -> Result<(), BoundsError> {
    if rank > sv.len() {
        return Err(BoundsError::RankExceedsSpectrum {
            rank,
            len: sv.len(),
        });
    }
    if rank > 0 && sv[rank - 1] <= T::zero() {
        return Err(BoundsError::ZeroSigmaAtRank { rank });
    }
    Ok(())
}

/// Bounds in the centroid setting `M = [A, ..., A]` (k copies) and
/// `M~ = [A, A + E_2, ..., A + E_k]`.
///
/// `pert_norms` holds `||E_2||, ..., ||E_k||`. The reference spectrum is
/// `sqrt(k) * sigma_i(A)`, so the per-index bound is
/// `sum_j (2 ||A|| e_j + e_j^2) / (sqrt(k) sigma_i(A))`.
pub fn centroid_bounds<T: Scalar>(
    base_norm: T,
    sv_of_a: &[T],
    rank: usize,
    pert_norms: &[T],
    k: usize,
) -> Result<GroupBoundReport<T>, BoundsError> {
    if k == 0 {
        return Err(BoundsError::BlockCountTooSmall { min: 1 });
    }
    if pert_norms.len() != k - 1 {
        return Err(BoundsError::LengthMismatch {
            expected: k - 1,
            found: pert_norms.len(),
        });
    }
    check_spectrum(sv_of_a)?;
    check_rank(sv_of_a, rank)?;
    let norms = centroid_norms(base_norm, pert_norms, k)?;
    let gram_left = gram_left_bound(&norms);
    let root_k = T::from_count(k).sqrt();
    Ok(GroupBoundReport {
        k,
        gram_right: gram_right_bound(&norms),
        gram_left,
        nonzero_index_bounds: sv_of_a[..rank]
            .iter()
            .map(|&s| gram_left / (root_k * s))
            .collect(),
        zero_index_bound: gram_left.sqrt(),
        rank_used: rank,
    })
}

/// Block norms of the centroid setting: `k` copies of `base_norm`, with the
/// first perturbation fixed to zero.
pub fn centroid_norms<T: Scalar>(
    base_norm: T,
    pert_norms: &[T],
    k: usize,
) -> Result<BlockNorms<T>, BoundsError> {
    let pert = std::iter::once(T::zero())
        .chain(pert_norms.iter().copied())
        .collect::<Vec<_>>();
    if pert.len() != k {
        return Err(BoundsError::LengthMismatch {
            expected: k.saturating_sub(1),
            found: pert_norms.len(),
        });
    }
    BlockNorms::new(vec![base_norm; k], pert)
}

/// Uniform-`eps` envelope for the centroid bounds:
/// `(k-1) eps (2 ||A|| + eps) / (sqrt(k) sigma_i(A))` for nonzero indices and
/// `sqrt((k-1) eps (2 ||A|| + eps))` beyond the rank. Both vanish as `eps -> 0`.
pub fn continuity_envelope<T: Scalar>(
    base_norm: T,
    sigma_i_of_a: T,
    k: usize,
    eps: T,
) -> Result<(T, T), BoundsError> {
    if k < 2 {
        return Err(BoundsError::BlockCountTooSmall { min: 2 });
    }
    if !(eps > T::zero()) {
        return Err(BoundsError::NonpositiveEps);
    }
    if !(sigma_i_of_a > T::zero()) {
        return Err(BoundsError::NonpositiveSigma);
    }
    let mass = T::from_count(k - 1) * eps * (base_norm + base_norm + eps);
    Ok((mass / (T::from_count(k).sqrt() * sigma_i_of_a), mass.sqrt()))
}

/// Largest group size guaranteed to respect an absolute tolerance `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KMax {
    Bounded(u64),
    Unbounded,
}

impl KMax {
    pub fn admits(self, k: u64) -> bool {
        match self {
            KMax::Bounded(max) => k <= max,
            KMax::Unbounded => true,
        }
    }
}

/// `floor( (tau sigma_r / (2 ||A_0|| eps_bar + eps_bar^2))^2 )`, or
/// [`KMax::Unbounded`] when `eps_bar = 0`.
pub fn kmax<T: Scalar>(
    tau: T,
    sigma_r_of_a: T,
    base_norm: T,
    eps_bar: T,
) -> Result<KMax, BoundsError> {
    if !(tau > T::zero()) {
        return Err(BoundsError::NonpositiveTau);
    }
    if !(sigma_r_of_a > T::zero()) {
        return Err(BoundsError::NonpositiveSigma);
    }
    if !(eps_bar >= T::zero()) {
        return Err(BoundsError::InvalidNorm { index: 0 });
    }
    if eps_bar == T::zero() {
        return Ok(KMax::Unbounded);
    }
    let ratio = tau * sigma_r_of_a / block_term(base_norm, eps_bar);
    let value = (ratio * ratio).floor();
    Ok(KMax::Bounded(value.to_u64().unwrap_or(u64::MAX)))
}
