use super::{derive_seed, gen_block, gen_perturbation, HarnessError, TrialConfig, SOUNDNESS_TOL};
use crate::bounds::continuity_envelope;
use crate::matrix::{concat_h, numerical_rank, singular_values, DenseMatrix};
use crate::Scalar;

/// One row of the continuity table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub eps: f64,
    /// `max_{trial, i <= r} |sigma_i(M~) - sqrt(k) sigma_i(A_0)|`.
    pub max_deviation: T,
    /// Envelope at `sigma_r(A_0)` (the loosest index), maximized over trials.
    pub envelope: T,
    /// Largest per-index `deviation / envelope`.
    pub max_ratio: T,
    /// Every index of every trial satisfied `deviation <= envelope + slack`.
    pub sound: bool,
}

/// Sweeps the perturbation size over `eps_grid` in the centroid setting.
///
/// Per trial, the reference `A_0` and the unit-norm perturbation directions
/// `D_j` are fixed across the grid; the perturbed copies are
/// `A_0 + eps * D_j`, so only the magnitude varies along the sweep.
pub fn run_continuity_sweep<T: Scalar>(
    base_cfg: &TrialConfig,
    eps_grid: &[f64],
) -> Result<Vec<SweepRow<T>>, HarnessError> {
    base_cfg.validate()?;
    if base_cfg.k < 2 {
        return Err(HarnessError::InvalidConfig(
            "continuity sweep needs k >= 2".into(),
        ));
    }
    if eps_grid.is_empty() {
        return Err(HarnessError::EmptyGrid);
    }
    for (i, &e) in eps_grid.iter().enumerate() {
        if !(e > 0.0) || !e.is_finite() || (i > 0 && e >= eps_grid[i - 1]) {
            return Err(HarnessError::UnsortedGrid(i));
        }
    }

    let (m, n, k) = (base_cfg.m, base_cfg.n, base_cfg.k);
    let root_k = T::from_count(k).sqrt();
    let mut rows: Vec<SweepRow<T>> = eps_grid
        .iter()
        .map(|&eps| SweepRow {
            eps,
            max_deviation: T::zero(),
            envelope: T::zero(),
            max_ratio: T::zero(),
            sound: true,
        })
        .collect();

    for t in 0..base_cfg.trials {
        let seed = base_cfg.trial_seed(t);
        let num = |source| HarnessError::Numerical { seed, source };
        let a0: DenseMatrix<T> = gen_block(m, n, base_cfg.base_rank, derive_seed(seed, 0))?;
        let directions = (1..k)
            .map(|j| gen_perturbation::<T>(m, n, 1.0, derive_seed(seed, j as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        let sv_a = singular_values(&a0).map_err(num)?;
        let rank = numerical_rank(&sv_a, m, n, None).map_err(num)?;
        let base = sv_a[0];
        let slack = T::lit(SOUNDNESS_TOL) * T::one().max(root_k * base);

        for row in rows.iter_mut() {
            let eps = T::lit(row.eps);
            let blocks: Vec<DenseMatrix<T>> = std::iter::once(a0.clone())
                .chain(directions.iter().map(|d| a0.add(&d.scale(eps))))
                .collect();
            let sv = singular_values(&concat_h(&blocks).map_err(num)?).map_err(num)?;
            for i in 0..rank {
                let dev = (sv[i] - root_k * sv_a[i]).abs();
                let (env, _) = continuity_envelope(base, sv_a[i], k, eps)
                    .map_err(|source| HarnessError::Bounds { seed, source })?;
                row.max_deviation = row.max_deviation.max(dev);
                row.max_ratio = row.max_ratio.max(dev / env);
                row.sound &= dev <= env + slack;
                if i + 1 == rank {
                    row.envelope = row.envelope.max(env);
                }
            }
        }
    }
    Ok(rows)
}

/// `Some(last <= first / 10)` when the grid spans at least two decades,
/// `None` otherwise.
pub fn sweep_decays<T: Scalar>(rows: &[SweepRow<T>]) -> Option<bool> {
    let (first, last) = (rows.first()?, rows.last()?);
    if first.eps / last.eps < 100.0 {
        return None;
    }
    Some(last.max_deviation <= first.max_deviation / T::lit(10.0))
}
