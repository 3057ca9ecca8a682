//! Deterministic singular-value perturbation bounds for horizontally
//! concatenated block matrices `M = [A_1, ..., A_k]`.
//!
//! The crate is organised bottom-up:
//!
//! * [`matrix`]: dense matrices, one-sided Jacobi SVD, spectral norm,
//!   numerical rank and horizontal concatenation.
//! * [`bounds`]: closed-form bounds over block-norm summaries
//!   (`a_j = ||A_j||_2`, `e_j = ||E_j||_2`).
//! * [`planner`]: greedy grouping of a block stream under an `(r, tau)`
//!   spectral budget.
//! * [`compressor`] and [`container`]: joint truncated-SVD compression of a
//!   group and its binary serialization.
//! * [`harness`]: randomized certification of every bound against full-SVD
//!   oracles.
//!
//! Everything is generic over [`Scalar`] (`f32`/`f64`); the aliases at the
//! crate root fix the working precision to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod compressor;
pub mod container;
pub mod harness;
pub mod matrix;
pub mod planner;
mod scalar;

pub use bounds::{BoundsError, KMax};
pub use compressor::CompressError;
pub use container::ContainerError;
pub use harness::{BoundName, HarnessError};
pub use matrix::{
    concat_h, numerical_rank, replicated_spectrum, singular_values, spectral_norm, svd,
};
pub use matrix::{DenseMatrix, MatrixError, SvdFactors};
pub use planner::{PlanError, PlannerMode};
pub use scalar::Scalar;

pub type Matrix = DenseMatrix<f64>;
pub type Svd = SvdFactors<f64>;
pub type BlockNorms = bounds::BlockNorms<f64>;
pub type GroupBoundReport = bounds::GroupBoundReport<f64>;
pub type SpectralBudget = planner::SpectralBudget<f64>;
pub type GroupSpec = planner::GroupSpec<f64>;
pub type GroupingPlan = planner::GroupingPlan<f64>;
pub type CompressedGroup = compressor::CompressedGroup<f64>;
pub type ReconstructionError = compressor::ReconstructionError<f64>;
pub type TrialConfig = harness::TrialConfig;
pub type TightnessRecord = harness::TightnessRecord<f64>;
pub type SweepRow = harness::SweepRow<f64>;

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
