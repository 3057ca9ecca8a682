use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    derive_seed, gen_block, gen_perturbation, BoundName, HarnessError, TightnessRecord,
    TrialConfig, ORDERING_REL_TOL,
};
use crate::bounds::{
    block_norm_bound, centroid_bounds, continuity_envelope, sv_deviation_bounds, BlockNorms,
    BoundsError,
};
use crate::matrix::{concat_h, numerical_rank, singular_values, DenseMatrix, MatrixError};
use crate::Scalar;

const STREAM_BLOCKS: u64 = 1;
const STREAM_PERTURBATIONS: u64 = 2;
const STREAM_SCALES: u64 = 3;
const STREAM_GRID: u64 = 4;

/// Hook that may rewrite a bound before it is compared (fault injection).
pub type BoundTamper<'a, T> = &'a (dyn Fn(BoundName, T) -> T + Sync);

/// A generated block collection with its perturbations and an independent
/// `k x k` block grid for the block-norm bound.
#[derive(Debug, Clone)]
pub struct Instance<T> {
    pub seed: u64,
    pub eps: f64,
    pub blocks: Vec<DenseMatrix<T>>,
    pub perturbations: Vec<DenseMatrix<T>>,
    pub grid: Vec<Vec<DenseMatrix<T>>>,
}

impl<T: Scalar> Instance<T> {
    /// Blocks are rank-`base_rank` with spectral norm drawn from `[0.5, 2]`
    /// (block 0 and homogeneous instances use norm 1); perturbations have norm
    /// `eps * u` with `u` drawn from `[0.25, 1]` (exactly `eps` when homogeneous).
    pub fn generate(
        m: usize,
        n: usize,
        k: usize,
        base_rank: usize,
        eps: f64,
        homogeneous: bool,
        seed: u64,
    ) -> Result<Self, HarnessError> {
        let mut scales = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SCALES));
        let mut blocks = Vec::with_capacity(k);
        let mut perturbations = Vec::with_capacity(k);
        for j in 0..k {
            let block_scale = if homogeneous || j == 0 {
                1.0
            } else {
                scales.gen_range(0.5..=2.0)
            };
            let pert_scale = if homogeneous {
                1.0
            } else {
                scales.gen_range(0.25..=1.0)
            };
            let bseed = derive_seed(derive_seed(seed, STREAM_BLOCKS), j as u64);
            let pseed = derive_seed(derive_seed(seed, STREAM_PERTURBATIONS), j as u64);
            let block: DenseMatrix<T> = gen_block(m, n, base_rank, bseed)?;
            blocks.push(block.scale(T::lit(block_scale)));
            perturbations.push(gen_perturbation(m, n, eps * pert_scale, pseed)?);
        }
        let mut grid = Vec::with_capacity(k);
        for i in 0..k {
            let mut row = Vec::with_capacity(k);
            for j in 0..k {
                let gseed = derive_seed(derive_seed(seed, STREAM_GRID), (i * k + j) as u64);
                let size = scales.gen_range(0.0..=1.0);
                row.push(gen_perturbation(m, n, size, gseed)?);
            }
            grid.push(row);
        }
        Ok(Self {
            seed,
            eps,
            blocks,
            perturbations,
            grid,
        })
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn perturbed_blocks(&self) -> Vec<DenseMatrix<T>> {
        self.blocks
            .iter()
            .zip(&self.perturbations)
            .map(|(a, e)| a.add(e))
            .collect()
    }

    /// `[A_0, A_0 + E_1, ..., A_0 + E_{k-1}]`.
    pub fn centroid_blocks(&self) -> Vec<DenseMatrix<T>> {
        let a0 = &self.blocks[0];
        std::iter::once(a0.clone())
            .chain(self.perturbations[1..].iter().map(|e| a0.add(e)))
            .collect()
    }

    /// The grid assembled into one `(k m) x (k n)` matrix.
    pub fn assembled_grid(&self) -> DenseMatrix<T> {
        let (m, n) = self.grid[0][0].shape();
        let k = self.grid.len();
        DenseMatrix::from_fn(k * m, k * n, |i, j| {
            self.grid[i / m][j / n].get(i % m, j % n)
        })
    }
}

/// Records of a batch plus the trials that broke the
/// `gram_left <= gram_right` ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary<T> {
    pub records: Vec<TightnessRecord<T>>,
    pub ordering_violations: Vec<u64>,
}

impl<T: Scalar> TrialSummary<T> {
    pub fn violations(&self) -> Vec<&TightnessRecord<T>> {
        self.records.iter().filter(|r| !r.is_sound()).collect()
    }

    pub fn is_sound(&self) -> bool {
        self.ordering_violations.is_empty() && self.records.iter().all(TightnessRecord::is_sound)
    }

    /// Largest ratio and record count per bound, in [`BoundName::ALL`] order;
    /// bounds with no records are omitted.
    pub fn max_ratios(&self) -> Vec<(BoundName, T, usize)> {
        BoundName::ALL
            .iter()
            .filter_map(|&name| {
                let mut count = 0;
                let mut worst = T::zero();
                for r in self.records.iter().filter(|r| r.bound_name == name) {
                    count += 1;
                    worst = worst.max(r.ratio);
                }
                (count > 0).then_some((name, worst, count))
            })
            .collect()
    }
}

pub fn run_bound_trials<T: Scalar>(cfg: &TrialConfig) -> Result<TrialSummary<T>, HarnessError> {
    run_bound_trials_with(cfg, None)
}

/// Runs `cfg.trials` independent trials in parallel; results are merged in
/// trial order, so the output does not depend on scheduling.
pub fn run_bound_trials_with<T: Scalar>(
    cfg: &TrialConfig,
    tamper: Option<BoundTamper<'_, T>>,
) -> Result<TrialSummary<T>, HarnessError> {
    cfg.validate()?;
    let per_trial: Vec<(Vec<TightnessRecord<T>>, bool)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = cfg.trial_seed(t);
            let inst = Instance::generate(
                cfg.m,
                cfg.n,
                cfg.k,
                cfg.base_rank,
                cfg.eps,
                cfg.homogeneous,
                seed,
            )?;
            evaluate_instance(&inst, t, tamper)
        })
        .collect::<Result<_, _>>()?;

    let mut summary = TrialSummary {
        records: Vec::new(),
        ordering_violations: Vec::new(),
    };
    for (t, (records, ordered)) in per_trial.into_iter().enumerate() {
        if !ordered {
            summary.ordering_violations.push(cfg.trial_seed(t));
        }
        summary.records.extend(records);
    }
    Ok(summary)
}

/// Evaluates every bound on one instance. Returns the records and whether the
/// `gram_left <= gram_right` ordering held (for both the general and the
/// centroid norm summaries).
pub fn evaluate_instance<T: Scalar>(
    inst: &Instance<T>,
    trial: usize,
    tamper: Option<BoundTamper<'_, T>>,
) -> Result<(Vec<TightnessRecord<T>>, bool), HarnessError> {
    let seed = inst.seed;
    let num = |source: MatrixError| HarnessError::Numerical { seed, source };
    let bnd = |source: BoundsError| HarnessError::Bounds { seed, source };
    let adjust = |name: BoundName, value: T| match tamper {
        Some(f) => f(name, value),
        None => value,
    };
    let top =
        |a: &DenseMatrix<T>| -> Result<T, HarnessError> { Ok(singular_values(a).map_err(num)?[0]) };

    let k = inst.k();
    let (m, n) = inst.blocks[0].shape();
    let mut records = Vec::new();
    let mut push = |name: BoundName, index: Option<usize>, actual: T, bound: T, scale: T| {
        records.push(TightnessRecord::new(
            name,
            index,
            trial,
            seed,
            actual,
            adjust(name, bound),
            scale,
        ));
    };

    // General setting M = [A_j], M~ = [A_j + E_j].
    let m_mat = concat_h(&inst.blocks).map_err(num)?;
    let m_tilde = concat_h(&inst.perturbed_blocks()).map_err(num)?;
    let base_norms = inst.blocks.iter().map(top).collect::<Result<Vec<_>, _>>()?;
    let pert_norms = inst
        .perturbations
        .iter()
        .map(top)
        .collect::<Result<Vec<_>, _>>()?;
    let norms = BlockNorms::new(base_norms.clone(), pert_norms.clone()).map_err(bnd)?;

    let sv_m = singular_values(&m_mat).map_err(num)?;
    let sv_mt = singular_values(&m_tilde).map_err(num)?;
    let rank = numerical_rank(&sv_m, m, k * n, None).map_err(num)?;
    let report = sv_deviation_bounds(&norms, &sv_m, rank).map_err(bnd)?;

    let sv_scale = T::one().max(sv_m[0]);
    let gram_scale = T::one().max(sv_m[0] * sv_m[0]);

    let left_diff = m_tilde.gram_left().sub(&m_mat.gram_left());
    push(
        BoundName::GramLeft,
        None,
        top(&left_diff)?,
        report.gram_left,
        gram_scale,
    );
    let right_diff = m_tilde.gram_right().sub(&m_mat.gram_right());
    push(
        BoundName::GramRight,
        None,
        top(&right_diff)?,
        report.gram_right,
        gram_scale,
    );

    for (i, (&st, &s)) in sv_mt.iter().zip(&sv_m).enumerate().take(rank) {
        push(
            BoundName::SvNonzero,
            Some(i),
            (st - s).abs(),
            report.nonzero_index_bounds[i],
            sv_scale,
        );
    }
    for (i, &st) in sv_mt.iter().enumerate().skip(rank) {
        push(
            BoundName::SvZero,
            Some(i),
            st,
            report.zero_index_bound,
            sv_scale,
        );
    }

    let ordering_tol = T::lit(ORDERING_REL_TOL);
    let mut ordered = report.gram_left <= report.gram_right * (T::one() + ordering_tol);

    // Block-norm bound on an independent k x k grid.
    let grid_norms = inst
        .grid
        .iter()
        .map(|row| row.iter().map(top).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let grid_bound = block_norm_bound(&grid_norms).map_err(bnd)?;
    let grid_actual = top(&inst.assembled_grid())?;
    push(
        BoundName::BlockNorm,
        None,
        grid_actual,
        grid_bound,
        T::one().max(grid_actual),
    );

    // Centroid setting: k copies of A_0 against [A_0, A_0 + E_1, ...].
    let a0 = &inst.blocks[0];
    let sv_a = singular_values(a0).map_err(num)?;
    let rank_a = numerical_rank(&sv_a, m, n, None).map_err(num)?;
    let base = sv_a[0];
    let centroid = centroid_bounds(base, &sv_a, rank_a, &pert_norms[1..], k).map_err(bnd)?;
    ordered &= centroid.gram_left <= centroid.gram_right * (T::one() + ordering_tol);

    let sv_c = singular_values(&concat_h(&inst.centroid_blocks()).map_err(num)?).map_err(num)?;
    let root_k = T::from_count(k).sqrt();
    let c_scale = T::one().max(root_k * base);
    for i in 0..rank_a {
        let dev = (sv_c[i] - root_k * sv_a[i]).abs();
        push(
            BoundName::Centroid,
            Some(i),
            dev,
            centroid.nonzero_index_bounds[i],
            c_scale,
        );
    }
    for (i, &s) in sv_c.iter().enumerate().skip(rank_a) {
        push(
            BoundName::Centroid,
            Some(i),
            s,
            centroid.zero_index_bound,
            c_scale,
        );
    }

    if k >= 2 && inst.eps > 0.0 {
        let eps = T::lit(inst.eps);
        for i in 0..rank_a {
            let (env, _) = continuity_envelope(base, sv_a[i], k, eps).map_err(bnd)?;
            let dev = (sv_c[i] - root_k * sv_a[i]).abs();
            push(BoundName::ContinuityEnvelope, Some(i), dev, env, c_scale);
        }
        let (_, zero_env) = continuity_envelope(base, sv_a[0], k, eps).map_err(bnd)?;
        for (i, &s) in sv_c.iter().enumerate().skip(rank_a) {
            push(BoundName::ContinuityEnvelope, Some(i), s, zero_env, c_scale);
        }
    }

    Ok((records, ordered))
}
