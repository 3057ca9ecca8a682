use std::path::{Path, PathBuf};

use blockspec::bounds::{centroid_bounds, kmax};
use blockspec::compressor::{compress_group, group_reconstruction_error, reconstruct_block};
use blockspec::harness::{run_bound_trials_with, run_continuity_sweep, sweep_decays, BoundTamper};
use blockspec::planner::{certify_plan, plan_groups};
use blockspec::{
    concat_h, container, numerical_rank, singular_values, spectral_norm, BoundsError,
    CompressError, CompressedGroup, HarnessError, KMax, Matrix, MatrixError, PlanError,
    PlannerMode, SpectralBudget, TrialConfig,
};
use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::Value;

use crate::error::{exit, CliError};
use crate::manifest::Manifest;
use crate::matrix_io::read_matrix_csv;
use crate::report::{envelope, opt_real, real, reals, Obj};

#[derive(Debug, Parser)]
#[command(
    name = "blockspec",
    version,
    about = "Spectral bounds, planning and joint compression for block matrices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Perturbation bounds with the first block as reference.
    Bounds(ManifestArgs),
    /// Greedy grouping of the blocks under the spectral budget.
    Plan(ManifestArgs),
    /// Plan, then jointly compress every group into one container file.
    Compress(CompressArgs),
    /// Randomized soundness check of every bound.
    Verify(VerifyArgs),
    /// Continuity table over a decreasing perturbation grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ManifestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Overrides the manifest's target rank.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Overrides the manifest's tolerance.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Overrides the manifest's relative numerical-rank threshold.
    #[arg(long)]
    pub rank_tol: Option<f64>,
    /// `true`: group multiplier sqrt(k); `false`: (k-1)/sqrt(k).
    #[arg(long = "strict-paper-k", default_value_t = true, action = ArgAction::Set)]
    pub sqrt_k_multiplier: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CompressArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Compression rank; defaults to the manifest's target rank.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub rank_tol: Option<f64>,
    #[arg(long = "strict-paper-k", default_value_t = true, action = ArgAction::Set)]
    pub sqrt_k_multiplier: bool,
    /// Container output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Rank of each generated block.
    #[arg(long, default_value_t = 4)]
    pub rank: usize,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Unit block norms and perturbation norms exactly `eps`.
    #[arg(long)]
    pub homogeneous: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 4)]
    pub rank: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Strictly decreasing, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6])]
    pub eps_grid: Vec<f64>,
}

/// Report plus the exit status it implies.
#[derive(Debug)]
pub struct Outcome {
    pub report: Value,
    pub status: u8,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Self {
            report,
            status: exit::OK,
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Bounds(a) => cmd_bounds(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Compress(a) => cmd_compress(a),
        Command::Verify(a) => cmd_verify(a, None),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

struct Inputs {
    manifest: Manifest,
    blocks: Vec<Matrix>,
    budget: SpectralBudget,
    rank_tol: Option<f64>,
    mode: PlannerMode,
}

impl Inputs {
    fn path(&self, index: usize) -> &Path {
        &self.manifest.block_paths[index]
    }

    fn config(&self, manifest_path: &Path) -> Obj {
        Obj::new()
            .set("manifest", manifest_path.display().to_string())
            .set(
                "block_paths",
                self.manifest
                    .block_paths
                    .iter()
                    .map(|p| Value::from(p.display().to_string()))
                    .collect::<Vec<_>>(),
            )
            .set("target_rank", self.budget.target_rank())
            .real("tolerance", self.budget.tolerance())
            .set("rank_tol", opt_real(self.rank_tol))
            .set("reference_policy", "first-of-group")
            .set(
                "planner_mode",
                match self.mode {
                    PlannerMode::SqrtK => "sqrt_k",
                    PlannerMode::KMinusOneOverSqrtK => "k_minus_one_over_sqrt_k",
                },
            )
    }

    fn matrix_err(&self, e: MatrixError) -> CliError {
        match e {
            MatrixError::ShapeMismatch {
                index,
                expected,
                found,
            } => CliError::Shape {
                path: self.path(index).into(),
                msg: format!(
                    "block is {}x{}, expected {}x{} like the first block",
                    found.0, found.1, expected.0, expected.1
                ),
            },
            other => CliError::Internal(other.to_string()),
        }
    }

    fn plan_err(&self, e: PlanError) -> CliError {
        match e {
            PlanError::RankDeficientReference {
                index,
                rank,
                required,
            } => CliError::RankDeficient {
                path: self.path(index).into(),
                rank,
                required,
            },
            PlanError::Matrix(m) => self.matrix_err(m),
            PlanError::ZeroTargetRank(_) | PlanError::NonpositiveTau => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

fn load_inputs(
    manifest_path: &Path,
    rank: Option<usize>,
    tau: Option<f64>,
    rank_tol: Option<f64>,
    sqrt_k_multiplier: bool,
) -> Result<Inputs, CliError> {
    let manifest = Manifest::load(manifest_path)?;
    let r = rank.unwrap_or(manifest.budget.target_rank);
    let t = tau.unwrap_or(manifest.budget.tolerance);
    let budget = SpectralBudget::new(r, t).map_err(|e| CliError::Usage(e.to_string()))?;
    let rank_tol = rank_tol.or(manifest.rank_tol);
    if let Some(t) = rank_tol {
        if !(t > 0.0) || !t.is_finite() {
            return Err(CliError::Usage(format!(
                "--rank-tol must be positive, got {t}"
            )));
        }
    }
    let blocks = manifest
        .block_paths
        .iter()
        .map(|p| read_matrix_csv(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mode = if sqrt_k_multiplier {
        PlannerMode::SqrtK
    } else {
        PlannerMode::KMinusOneOverSqrtK
    };
    let inputs = Inputs {
        manifest,
        blocks,
        budget,
        rank_tol,
        mode,
    };
    blockspec::matrix::check_uniform_shape(&inputs.blocks).map_err(|e| inputs.matrix_err(e))?;
    Ok(inputs)
}

fn internal<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Internal(e.to_string())
}

pub fn cmd_bounds(args: &ManifestArgs) -> Result<Outcome, CliError> {
    let inp = load_inputs(
        &args.manifest,
        args.rank,
        args.tau,
        args.rank_tol,
        args.sqrt_k_multiplier,
    )?;
    let a0 = &inp.blocks[0];
    let (m, n) = a0.shape();
    let k = inp.blocks.len();
    let r = inp.budget.target_rank();

    let sv_a = singular_values(a0).map_err(internal)?;
    let rank = numerical_rank(&sv_a, m, n, inp.rank_tol).map_err(internal)?;
    if rank < r {
        return Err(CliError::RankDeficient {
            path: inp.path(0).into(),
            rank,
            required: r,
        });
    }
    let base_norm = sv_a[0];
    let pert_norms = inp.blocks[1..]
        .iter()
        .map(|b| spectral_norm(&b.sub(a0)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(internal)?;
    let eps_bar = pert_norms.iter().copied().fold(0.0, f64::max);
    let report = centroid_bounds(base_norm, &sv_a, rank, &pert_norms, k).map_err(internal)?;

    let actual = singular_values(&concat_h(&inp.blocks).map_err(|e| inp.matrix_err(e))?)
        .map_err(internal)?;
    let root_k = (k as f64).sqrt();
    let nonzero_dev: Vec<f64> = (0..rank)
        .map(|i| (actual[i] - root_k * sv_a[i]).abs())
        .collect();
    let tail_max = actual[rank.min(actual.len())..]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let within = nonzero_dev
        .iter()
        .zip(&report.nonzero_index_bounds)
        .all(|(d, b)| d <= b)
        && tail_max <= report.zero_index_bound;

    let kmax_value = match kmax(inp.budget.tolerance(), sv_a[r - 1], base_norm, eps_bar) {
        Ok(KMax::Bounded(v)) => Value::from(v),
        Ok(KMax::Unbounded) => Value::from("unbounded"),
        Err(BoundsError::NonpositiveSigma) => Value::Null,
        Err(e) => return Err(internal(e)),
    };

    let result = Obj::new()
        .set("k", k)
        .set("shape", vec![m, n])
        .set("reference_rank", rank)
        .real("reference_norm", base_norm)
        .set("reference_singular_values", reals(&sv_a))
        .set("perturbation_norms", reals(&pert_norms))
        .real("eps_bar", eps_bar)
        .real("gram_right_bound", report.gram_right)
        .real("gram_left_bound", report.gram_left)
        .set("nonzero_index_bounds", reals(&report.nonzero_index_bounds))
        .real("zero_index_bound", report.zero_index_bound)
        .set("measured_nonzero_index_deviations", reals(&nonzero_dev))
        .real("measured_zero_index_max", tail_max)
        .set("measured_within_bounds", within)
        .set("kmax", kmax_value);
    Ok(Outcome::ok(envelope(
        "bounds",
        inp.config(&args.manifest),
        result,
    )))
}

fn plan_and_certify(inp: &Inputs) -> Result<(blockspec::GroupingPlan, Vec<f64>), CliError> {
    let plan = plan_groups(&inp.blocks, &inp.budget, inp.rank_tol, inp.mode)
        .map_err(|e| inp.plan_err(e))?;
    let deviations = certify_plan(&plan, &inp.blocks).map_err(|e| inp.plan_err(e))?;
    Ok((plan, deviations))
}

pub fn cmd_plan(args: &ManifestArgs) -> Result<Outcome, CliError> {
    let inp = load_inputs(
        &args.manifest,
        args.rank,
        args.tau,
        args.rank_tol,
        args.sqrt_k_multiplier,
    )?;
    let (plan, deviations) = plan_and_certify(&inp)?;
    let tau = inp.budget.tolerance();
    let groups: Vec<Value> = plan
        .groups
        .iter()
        .zip(&deviations)
        .map(|(g, &dev)| {
            Obj::new()
                .set("members", g.member_indices.clone())
                .set("reference", g.reference_index)
                .set("k", g.k())
                .real("eps_bar", g.eps_bar)
                .real("reference_norm", g.base_norm)
                .set("reference_rank", g.reference_rank)
                .set("sigma_r", opt_real(g.sigma_r))
                .set("certified", g.is_certified())
                .set("certified_bound", opt_real(g.certified_bound))
                .real("measured_deviation", dev)
                .set("measured_within_tau", dev <= tau)
                .into()
        })
        .collect();
    let uncertified = plan.uncertified_references();
    let result = Obj::new()
        .set("total_blocks", plan.total_blocks)
        .set("group_count", plan.groups.len())
        .set(
            "group_sizes",
            plan.groups.iter().map(|g| g.k()).collect::<Vec<_>>(),
        )
        .set("uncertified_references", uncertified.clone())
        .set("groups", groups);
    let report = envelope("plan", inp.config(&args.manifest), result);
    let status = if uncertified.is_empty() {
        exit::OK
    } else {
        for &i in &uncertified {
            eprintln!(
                "warning: {}: reference block is rank deficient, group left uncertified",
                inp.path(i).display()
            );
        }
        exit::RANK_DEFICIENT
    };
    Ok(Outcome { report, status })
}

pub fn cmd_compress(args: &CompressArgs) -> Result<Outcome, CliError> {
    let inp = load_inputs(
        &args.manifest,
        None,
        args.tau,
        args.rank_tol,
        args.sqrt_k_multiplier,
    )?;
    let rank = args.rank.unwrap_or(inp.budget.target_rank());
    if rank == 0 {
        return Err(CliError::Usage("--rank must be >= 1".into()));
    }
    let (plan, deviations) = plan_and_certify(&inp)?;
    if let Some(&i) = plan.uncertified_references().first() {
        let g = plan
            .groups
            .iter()
            .find(|g| g.reference_index == i)
            .expect("listed");
        return Err(CliError::RankDeficient {
            path: inp.path(i).into(),
            rank: g.reference_rank,
            required: inp.budget.target_rank(),
        });
    }

    let mut compressed: Vec<CompressedGroup> = Vec::with_capacity(plan.groups.len());
    let mut group_reports: Vec<Value> = Vec::with_capacity(plan.groups.len());
    let (mut joint, mut separate) = (0u64, 0u64);
    let mut max_error = 0.0f64;
    for (gi, (g, &dev)) in plan.groups.iter().zip(&deviations).enumerate() {
        let members: Vec<Matrix> = g
            .member_indices
            .iter()
            .map(|&i| inp.blocks[i].clone())
            .collect();
        let c = compress_group(&members, rank).map_err(|e| match e {
            CompressError::RankTooLarge { rank, max } => CliError::RankTooLarge {
                rank,
                max,
                context: Some(format!(
                    "group {gi} starting at {}",
                    inp.path(g.reference_index).display()
                )),
            },
            other => internal(other),
        })?;
        let err = group_reconstruction_error(&c, &members).map_err(internal)?;
        let stats = c.storage();
        joint += stats.joint_scalars;
        separate += stats.separate_scalars;
        max_error = err.per_block.iter().copied().fold(max_error, f64::max);
        group_reports.push(
            Obj::new()
                .set("members", g.member_indices.clone())
                .set("k", g.k())
                .set("rank", rank)
                .set("certified_bound", opt_real(g.certified_bound))
                .real("measured_deviation", dev)
                .set("joint_scalars", stats.joint_scalars)
                .set("separate_scalars", stats.separate_scalars)
                .real("storage_ratio", stats.ratio)
                .set("reconstruction_errors", reals(&err.per_block))
                .real("concatenated_error", err.concatenated)
                .into(),
        );
        compressed.push(c);
    }

    let bytes = container::encode(&compressed).map_err(internal)?;
    std::fs::write(&args.out, &bytes).map_err(|e| CliError::io(&args.out, e))?;
    let reread = std::fs::read(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let decoded: Vec<CompressedGroup> =
        container::decode(&reread).map_err(|e| CliError::parse(&args.out, e.to_string()))?;
    let roundtrip = decoded.len() == compressed.len()
        && compressed.iter().zip(&decoded).all(|(a, b)| {
            a.k() == b.k()
                && (0..a.k()).all(|i| {
                    matches!((reconstruct_block(a, i), reconstruct_block(b, i)), (Ok(x), Ok(y)) if x == y)
                })
        });

    let config = inp
        .config(&args.manifest)
        .set("compression_rank", rank)
        .set("out", args.out.display().to_string());
    let result = Obj::new()
        .set("group_count", compressed.len())
        .set("container_bytes", bytes.len())
        .set("roundtrip_bit_exact", roundtrip)
        .set("joint_scalars", joint)
        .set("separate_scalars", separate)
        .real("storage_ratio", joint as f64 / separate as f64)
        .real("max_reconstruction_error", max_error)
        .set("groups", group_reports);
    Ok(Outcome::ok(envelope("compress", config, result)))
}

fn harness_err(e: HarnessError) -> CliError {
    match e {
        HarnessError::RankTooLarge { rank, max } => CliError::RankTooLarge {
            rank,
            max,
            context: Some("block rank vs min(m, n)".into()),
        },
        HarnessError::InvalidConfig(_)
        | HarnessError::EmptyGrid
        | HarnessError::UnsortedGrid(_) => CliError::Usage(e.to_string()),
        other => CliError::Internal(other.to_string()),
    }
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Usage(format!("{command} requires --seed")))
}

/// `tamper` rewrites each bound before comparison; the binary always passes `None`.
pub fn cmd_verify(
    args: &VerifyArgs,
    tamper: Option<BoundTamper<'_, f64>>,
) -> Result<Outcome, CliError> {
    let seed = require_seed(args.seed, "verify")?;
    let cfg = TrialConfig {
        m: args.m,
        n: args.n,
        k: args.k,
        base_rank: args.rank,
        eps: args.eps,
        seed,
        trials: args.trials,
        homogeneous: args.homogeneous,
    };
    let summary = run_bound_trials_with::<f64>(&cfg, tamper).map_err(harness_err)?;
    let per_bound: Vec<Value> = summary
        .max_ratios()
        .into_iter()
        .map(|(name, ratio, count)| {
            Obj::new()
                .set("bound", name.as_str())
                .set("max_ratio", real(ratio))
                .set("records", count)
                .into()
        })
        .collect();
    let violations = summary.violations();
    let listed: Vec<Value> = violations
        .iter()
        .take(20)
        .map(|r| {
            Obj::new()
                .set("bound", r.bound_name.as_str())
                .set("trial", r.trial)
                .set("seed", r.seed)
                .set("index", r.index.map_or(Value::Null, Value::from))
                .real("actual", r.actual)
                .real("bound_value", r.bound)
                .into()
        })
        .collect();
    let sound = summary.is_sound();
    let config = Obj::new()
        .set("m", args.m)
        .set("n", args.n)
        .set("k", args.k)
        .set("rank", args.rank)
        .real("eps", args.eps)
        .set("seed", seed)
        .set("trials", args.trials)
        .set("homogeneous", args.homogeneous);
    let result = Obj::new()
        .set("sound", sound)
        .set("records", summary.records.len())
        .set("max_ratios", per_bound)
        .set("violation_count", violations.len())
        .set("violations", listed)
        .set(
            "ordering_violation_seeds",
            summary.ordering_violations.clone(),
        );
    let report = envelope("verify", config, result);
    if sound {
        return Ok(Outcome::ok(report));
    }
    for r in violations.iter().take(20) {
        eprintln!(
            "soundness violation: {} trial {} (replay seed {}): actual {:e} > bound {:e}",
            r.bound_name.as_str(),
            r.trial,
            r.seed,
            r.actual,
            r.bound
        );
    }
    for s in &summary.ordering_violations {
        eprintln!("ordering violation: replay seed {s}");
    }
    Ok(Outcome {
        report,
        status: exit::SOUNDNESS,
    })
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Outcome, CliError> {
    let seed = require_seed(args.seed, "sweep")?;
    let cfg = TrialConfig {
        m: args.m,
        n: args.n,
        k: args.k,
        base_rank: args.rank,
        eps: 0.0,
        seed,
        trials: args.trials,
        homogeneous: false,
    };
    let rows = run_continuity_sweep::<f64>(&cfg, &args.eps_grid).map_err(harness_err)?;
    let mut table = String::from("eps,max_deviation,envelope,max_ratio,sound\n");
    for r in &rows {
        table.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            r.eps, r.max_deviation, r.envelope, r.max_ratio, r.sound
        ));
    }
    let row_values: Vec<Value> = rows
        .iter()
        .map(|r| {
            Obj::new()
                .real("eps", r.eps)
                .real("max_deviation", r.max_deviation)
                .real("envelope", r.envelope)
                .real("max_ratio", r.max_ratio)
                .set("sound", r.sound)
                .into()
        })
        .collect();
    let sound = rows.iter().all(|r| r.sound);
    let config = Obj::new()
        .set("m", args.m)
        .set("n", args.n)
        .set("k", args.k)
        .set("rank", args.rank)
        .set("seed", seed)
        .set("trials", args.trials)
        .set("eps_grid", reals(&args.eps_grid));
    let result = Obj::new()
        .set("sound", sound)
        .set(
            "decays_tenfold",
            sweep_decays(&rows).map_or(Value::Null, Value::from),
        )
        .set("rows", row_values)
        .set("csv", table);
    let report = envelope("sweep", config, result);
    let status = if sound { exit::OK } else { exit::SOUNDNESS };
    Ok(Outcome { report, status })
}
