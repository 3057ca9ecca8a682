//! Randomized certification of the bounds against full-SVD oracles.
//!
//! Every "actual" quantity is measured on explicitly assembled matrices
//! (concatenations, Gram differences, block matrices) with the Jacobi SVD;
//! every "bound" comes from [`crate::bounds`] evaluated on block norms only.

mod sweep;
mod trials;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::bounds::BoundsError;
use crate::matrix::{spectral_norm, DenseMatrix, MatrixError};
use crate::Scalar;

pub use sweep::{run_continuity_sweep, sweep_decays, SweepRow};
pub use trials::{
    evaluate_instance, run_bound_trials, run_bound_trials_with, BoundTamper, Instance, TrialSummary,
};

/// Additive soundness slack, multiplied by the record's scale.
pub const SOUNDNESS_TOL: f64 = 1e-9;
/// Relative slack for the `gram_left <= gram_right` ordering (rounding only).
pub const ORDERING_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid trial configuration: {0}")]
    InvalidConfig(String),
    #[error("rank {rank} exceeds min(m, n) = {max}")]
    RankTooLarge { rank: usize, max: usize },
    #[error("epsilon grid is empty")]
    EmptyGrid,
    #[error("epsilon grid must be strictly decreasing and positive (index {0})")]
    UnsortedGrid(usize),
    #[error("numerical failure in trial with seed {seed}: {source}")]
    Numerical { seed: u64, source: MatrixError },
    #[error("bound evaluation failed in trial with seed {seed}: {source}")]
    Bounds { seed: u64, source: BoundsError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundName {
    GramRight,
    GramLeft,
    SvNonzero,
    SvZero,
    BlockNorm,
    Centroid,
    ContinuityEnvelope,
}

impl BoundName {
    pub const ALL: [BoundName; 7] = [
        BoundName::GramRight,
        BoundName::GramLeft,
        BoundName::SvNonzero,
        BoundName::SvZero,
        BoundName::BlockNorm,
        BoundName::Centroid,
        BoundName::ContinuityEnvelope,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundName::GramRight => "gram_right",
            BoundName::GramLeft => "gram_left",
            BoundName::SvNonzero => "sv_nonzero",
            BoundName::SvZero => "sv_zero",
            BoundName::BlockNorm => "block_norm",
            BoundName::Centroid => "centroid",
            BoundName::ContinuityEnvelope => "continuity_envelope",
        }
    }
}

/// One measured quantity against its analytical bound.
#[derive(Debug, Clone, PartialEq)]
pub struct TightnessRecord<T> {
    pub bound_name: BoundName,
    /// Singular value index (0-based) for per-index bounds.
    pub index: Option<usize>,
    pub trial: usize,
    pub seed: u64,
    pub actual: T,
    pub bound: T,
    /// `SOUNDNESS_TOL * scale`, with scale `max(1, sigma_1^2)` for Gram-level
    /// and `max(1, sigma_1)` for singular-value-level records.
    pub slack: T,
    /// `actual / bound`; 0 when both vanish (actual within slack of a zero
    /// bound), infinite when a zero bound is exceeded.
    pub ratio: T,
}

impl<T: Scalar> TightnessRecord<T> {
    pub fn new(
        bound_name: BoundName,
        index: Option<usize>,
        trial: usize,
        seed: u64,
        actual: T,
        bound: T,
        scale: T,
    ) -> Self {
        let slack = T::lit(SOUNDNESS_TOL) * scale;
        let ratio = if bound > T::zero() {
            actual / bound
        } else if actual <= slack {
            T::zero()
        } else {
            T::infinity()
        };
        Self {
            bound_name,
            index,
            trial,
            seed,
            actual,
            bound,
            slack,
            ratio,
        }
    }

    /// `actual <= bound + slack`.
    pub fn is_sound(&self) -> bool {
        self.actual <= self.bound + self.slack
    }
}

/// Dimensions and randomness for a batch of certification trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    /// Rank of each generated block `A_j`.
    pub base_rank: usize,
    /// Cap on `||E_j||_2`.
    pub eps: f64,
    pub seed: u64,
    pub trials: usize,
    /// All blocks share norm 1 and all perturbations norm `eps`.
    pub homogeneous: bool,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.m == 0 || self.n == 0 || self.k == 0 {
            return Err(HarnessError::InvalidConfig(format!(
                "dimensions must be positive (m={}, n={}, k={})",
                self.m, self.n, self.k
            )));
        }
        if self.base_rank == 0 || self.base_rank > self.m.min(self.n) {
            return Err(HarnessError::RankTooLarge {
                rank: self.base_rank,
                max: self.m.min(self.n),
            });
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(HarnessError::InvalidConfig(format!(
                "eps must be finite and >= 0, got {}",
                self.eps
            )));
        }
        if self.trials == 0 {
            return Err(HarnessError::InvalidConfig("trials must be >= 1".into()));
        }
        Ok(())
    }

    /// Seed of trial `t`.
    pub fn trial_seed(&self, t: usize) -> u64 {
        derive_seed(self.seed, t as u64)
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent child seed: `splitmix64(master ^ splitmix64(stream))`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

fn gaussian(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}

/// Rank-`rank` matrix: product of `m x rank` and `rank x n` standard Gaussian
/// factors, rescaled to unit spectral norm.
pub fn gen_block<T: Scalar>(
    m: usize,
    n: usize,
    rank: usize,
    seed: u64,
) -> Result<DenseMatrix<T>, HarnessError> {
    if rank == 0 || rank > m.min(n) {
        return Err(HarnessError::RankTooLarge {
            rank,
            max: m.min(n),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = gaussian(m, rank, &mut rng);
    let right = gaussian(rank, n, &mut rng);
    let product = left.matmul(&right);
    let norm =
        spectral_norm(&product).map_err(|source| HarnessError::Numerical { seed, source })?;
    Ok(product.scale(1.0 / norm).cast())
}

/// Gaussian matrix rescaled to spectral norm exactly `eps` (zero for `eps = 0`).
pub fn gen_perturbation<T: Scalar>(
    m: usize,
    n: usize,
    eps: f64,
    seed: u64,
) -> Result<DenseMatrix<T>, HarnessError> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(HarnessError::InvalidConfig(format!(
            "eps must be >= 0, got {eps}"
        )));
    }
    if eps == 0.0 {
        return Ok(DenseMatrix::zeros(m, n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian(m, n, &mut rng);
    let norm = spectral_norm(&g).map_err(|source| HarnessError::Numerical { seed, source })?;
    Ok(g.scale(eps / norm).cast())
}
