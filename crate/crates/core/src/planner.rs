//! Greedy segmentation of a block stream into joint-compression groups.
//!
//! Each group opens at the next unassigned block, which becomes the reference
//! `A_0`. Later blocks are treated as `A_0 + E_j` and admitted while
//! `mult(k) * (2 ||A_0|| eps_bar + eps_bar^2) / sigma_r(A_0) <= tau`, where
//! `eps_bar` is the running maximum of `||E_j||_2` and `mult(k)` is `sqrt(k)`
//! (or `(k - 1) / sqrt(k)` in [`PlannerMode::KMinusOneOverSqrtK`]). The first
//! violation closes the group.

use thiserror::Error;

use crate::bounds::BoundsError;
use crate::matrix::{
    check_uniform_shape, concat_h, numerical_rank, replicated_spectrum, singular_values,
    spectral_norm, DenseMatrix, MatrixError,
};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("spectral budget needs target rank >= 1, got {0}")]
    ZeroTargetRank(usize),
    #[error("spectral budget tolerance must be positive and finite")]
    NonpositiveTau,
    #[error("reference block {index} has numerical rank {rank} < target rank {required}")]
    RankDeficientReference {
        index: usize,
        rank: usize,
        required: usize,
    },
    #[error("plan does not match the supplied blocks: {0}")]
    PlanMismatch(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// The `(r, tau)` requirement `|sigma_i(M~) - sigma_i(M)| <= tau` for `i <= r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBudget<T> {
    target_rank: usize,
    tolerance: T,
}

impl<T: Scalar> SpectralBudget<T> {
    pub fn new(target_rank: usize, tolerance: T) -> Result<Self, PlanError> {
        if target_rank == 0 {
            return Err(PlanError::ZeroTargetRank(target_rank));
        }
        if !(tolerance > T::zero()) || !tolerance.is_finite() {
            return Err(PlanError::NonpositiveTau);
        }
        Ok(Self {
            target_rank,
            tolerance,
        })
    }

    pub fn target_rank(&self) -> usize {
        self.target_rank
    }

    pub fn tolerance(&self) -> T {
        self.tolerance
    }
}

/// Multiplier applied to the per-block perturbation mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlannerMode {
    /// `sqrt(k)`: the closed-form group-size rule.
    #[default]
    SqrtK,
    /// `(k - 1) / sqrt(k)`: only the `k - 1` perturbed copies are counted.
    KMinusOneOverSqrtK,
}

impl PlannerMode {
    pub fn multiplier<T: Scalar>(self, k: usize) -> T {
        let root = T::from_count(k).sqrt();
        match self {
            PlannerMode::SqrtK => root,
            PlannerMode::KMinusOneOverSqrtK => T::from_count(k.saturating_sub(1)) / root,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec<T> {
    /// Contiguous, ascending stream indices.
    pub member_indices: Vec<usize>,
    pub reference_index: usize,
    /// `max_j ||A_j - A_0||_2` over the members.
    pub eps_bar: T,
    pub base_norm: T,
    /// Numerical rank of `A_0`.
    pub reference_rank: usize,
    /// `sigma_r(A_0)`; `None` for a rank-deficient reference.
    pub sigma_r: Option<T>,
    /// Guaranteed bound on the top-r deviation, `None` when the group could
    /// not be certified (rank-deficient reference, emitted as a singleton).
    pub certified_bound: Option<T>,
}

impl<T: Scalar> GroupSpec<T> {
    pub fn k(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_certified(&self) -> bool {
        self.certified_bound.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupingPlan<T> {
    pub groups: Vec<GroupSpec<T>>,
    pub budget: SpectralBudget<T>,
    pub total_blocks: usize,
    pub mode: PlannerMode,
}

impl<T: Scalar> GroupingPlan<T> {
    /// Fails on the first uncertified group.
    pub fn require_certified(&self) -> Result<(), PlanError> {
        match self.groups.iter().find(|g| !g.is_certified()) {
            None => Ok(()),
            Some(g) => Err(PlanError::RankDeficientReference {
                index: g.reference_index,
                rank: g.reference_rank,
                required: self.budget.target_rank,
            }),
        }
    }

    pub fn uncertified_references(&self) -> Vec<usize> {
        self.groups
            .iter()
            .filter(|g| !g.is_certified())
            .map(|g| g.reference_index)
            .collect()
    }
}

/// Guaranteed top-r deviation of a `k`-block group:
/// `mult(k) (2 base_norm eps_bar + eps_bar^2) / sigma_r`.
pub fn group_bound<T: Scalar>(
    k: usize,
    eps_bar: T,
    base_norm: T,
    sigma_r: T,
    mode: PlannerMode,
) -> Result<T, BoundsError> {
    if !(sigma_r > T::zero()) {
        return Err(BoundsError::NonpositiveSigma);
    }
    let mass = (base_norm + base_norm) * eps_bar + eps_bar * eps_bar;
    Ok(mode.multiplier::<T>(k) * mass / sigma_r)
}

/// Whether a group of `k` blocks with running perturbation max `eps_bar`
/// stays inside the budget, i.e. `sqrt(k) (2 ||A_0|| eps_bar + eps_bar^2) <= tau sigma_r`.
pub fn group_feasible<T: Scalar>(
    k: usize,
    eps_bar: T,
    base_norm: T,
    sigma_r: T,
    budget: &SpectralBudget<T>,
) -> Result<bool, BoundsError> {
    group_feasible_with(k, eps_bar, base_norm, sigma_r, budget, PlannerMode::SqrtK)
}

pub fn group_feasible_with<T: Scalar>(
    k: usize,
    eps_bar: T,
    base_norm: T,
    sigma_r: T,
    budget: &SpectralBudget<T>,
    mode: PlannerMode,
) -> Result<bool, BoundsError> {
    Ok(group_bound(k, eps_bar, base_norm, sigma_r, mode)? <= budget.tolerance)
}

/// Greedy left-to-right grouping of `blocks` under `budget`.
///
/// A reference whose numerical rank (at `rank_tol`, default
/// `max(m, n) * eps`) is below the target rank cannot certify anything and is
/// emitted as an uncertified singleton group.
pub fn plan_groups<T: Scalar>(
    blocks: &[DenseMatrix<T>],
    budget: &SpectralBudget<T>,
    rank_tol: Option<T>,
    mode: PlannerMode,
) -> Result<GroupingPlan<T>, PlanError> {
    let (m, n) = check_uniform_shape(blocks)?;
    let r = budget.target_rank;
    let mut groups = Vec::new();
    let mut start = 0;
    while start < blocks.len() {
        let reference = &blocks[start];
        let sv = singular_values(reference)?;
        let base_norm = sv[0];
        let rank = numerical_rank(&sv, m, n, rank_tol)?;
        if rank < r {
            groups.push(GroupSpec {
                member_indices: vec![start],
                reference_index: start,
                eps_bar: T::zero(),
                base_norm,
                reference_rank: rank,
                sigma_r: None,
                certified_bound: None,
            });
            start += 1;
            continue;
        }
        let sigma_r = sv[r - 1];
        let mut eps_bar = T::zero();
        let mut end = start + 1;
        while end < blocks.len() {
            let e = spectral_norm(&blocks[end].sub(reference))?;
            let candidate = eps_bar.max(e);
            let size = end - start + 1;
            if !group_feasible_with(size, candidate, base_norm, sigma_r, budget, mode)? {
                break;
            }
            eps_bar = candidate;
            end += 1;
        }
        let certified = group_bound(end - start, eps_bar, base_norm, sigma_r, mode)?;
        groups.push(GroupSpec {
            member_indices: (start..end).collect(),
            reference_index: start,
            eps_bar,
            base_norm,
            reference_rank: rank,
            sigma_r: Some(sigma_r),
            certified_bound: Some(certified),
        });
        start = end;
    }
    Ok(GroupingPlan {
        groups,
        budget: *budget,
        total_blocks: blocks.len(),
        mode,
    })
}

/// Measured `max_{i <= r} |sigma_i(M~) - sqrt(k) sigma_i(A_0)|` for every group,
/// with `M~` the actual concatenation of the group's blocks (full-SVD oracle).
pub fn certify_plan<T: Scalar>(
    plan: &GroupingPlan<T>,
    blocks: &[DenseMatrix<T>],
) -> Result<Vec<T>, PlanError> {
    if plan.total_blocks != blocks.len() {
        return Err(PlanError::PlanMismatch(format!(
            "plan covers {} blocks, {} supplied",
            plan.total_blocks,
            blocks.len()
        )));
    }
    let mut expected_next = 0;
    let mut out = Vec::with_capacity(plan.groups.len());
    for (g, group) in plan.groups.iter().enumerate() {
        let contiguous = group
            .member_indices
            .iter()
            .enumerate()
            .all(|(offset, &idx)| idx == expected_next + offset);
        if group.member_indices.is_empty()
            || !contiguous
            || group.reference_index != group.member_indices[0]
        {
            return Err(PlanError::PlanMismatch(format!(
                "group {g} is not a contiguous run starting at block {expected_next}"
            )));
        }
        expected_next += group.k();
        if expected_next > blocks.len() {
            return Err(PlanError::PlanMismatch(format!(
                "group {g} extends past the last block"
            )));
        }

        let members: Vec<DenseMatrix<T>> = group
            .member_indices
            .iter()
            .map(|&i| blocks[i].clone())
            .collect();
        let reference_sv = singular_values(&blocks[group.reference_index])?;
        let ideal = replicated_spectrum(&reference_sv, group.k())?;
        let actual = singular_values(&concat_h(&members)?)?;
        let r = plan.budget.target_rank.min(ideal.len());
        let deviation = actual
            .iter()
            .zip(&ideal)
            .take(r)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()));
        out.push(deviation);
    }
    if expected_next != blocks.len() {
        return Err(PlanError::PlanMismatch(format!(
            "groups cover {expected_next} of {} blocks",
            blocks.len()
        )));
    }
    Ok(out)
}
