//! Acceptance suite. Run with
//! `cargo test -p blockspec-cli --test acceptance -- --nocapture`
//! to see one PASS/FAIL line per criterion.

use std::process::Command;
use std::time::Instant;

use blockspec::compressor::{compress_group, group_reconstruction_error, storage_accounting};
use blockspec::harness::{
    derive_seed, evaluate_instance, gen_block, gen_perturbation, run_continuity_sweep,
    sweep_decays, Instance, ORDERING_REL_TOL,
};
use blockspec::planner::{certify_plan, plan_groups};
use blockspec::{
    concat_h, singular_values, BoundName, Matrix, PlannerMode, SpectralBudget, TightnessRecord,
    TrialConfig,
};
use blockspec_cli::report::real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MASTER: u64 = 0x5EED_2024;
const EPS_SET: [f64; 4] = [0.0, 1e-4, 1e-2, 0.3];

struct Criterion {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

struct InstanceOutcome {
    homogeneous: bool,
    records: Vec<TightnessRecord>,
    ordered: bool,
}

/// 1000 instances with m, n <= 16, k <= 8 and eps cycling through
/// {0, 1e-4, 1e-2, 0.3}; every fourth group of four is homogeneous.
fn instance_set() -> (Vec<InstanceOutcome>, f64) {
    let start = Instant::now();
    let out = (0..1000u64)
        .map(|i| {
            let seed = derive_seed(MASTER, i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = rng.gen_range(1..=16);
            let n = rng.gen_range(1..=16);
            let k = rng.gen_range(1..=8);
            let rank = rng.gen_range(1..=m.min(n));
            let eps = EPS_SET[(i % 4) as usize];
            let homogeneous = (i / 4) % 4 == 0;
            let inst = Instance::<f64>::generate(m, n, k, rank, eps, homogeneous, seed).unwrap();
            let (records, ordered) = evaluate_instance(&inst, i as usize, None).unwrap();
            InstanceOutcome {
                homogeneous,
                records,
                ordered,
            }
        })
        .collect();
    (out, start.elapsed().as_secs_f64())
}

fn soundness(set: &[InstanceOutcome], names: &[BoundName]) -> (usize, usize, f64) {
    let mut checked = 0;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for r in set.iter().flat_map(|o| &o.records) {
        if names.contains(&r.bound_name) {
            checked += 1;
            if !r.is_sound() {
                violations += 1;
            }
            worst = worst.max(r.ratio);
        }
    }
    (checked, violations, worst)
}

fn bound_of(o: &InstanceOutcome, name: BoundName) -> f64 {
    o.records
        .iter()
        .find(|r| r.bound_name == name)
        .map(|r| r.bound)
        .expect("record present")
}

fn criterion_soundness(
    id: u32,
    name: &'static str,
    set: &[InstanceOutcome],
    names: &[BoundName],
    extra: &str,
) -> Criterion {
    let (checked, violations, worst) = soundness(set, names);
    Criterion {
        id,
        name,
        pass: checked > 0 && violations == 0,
        detail: format!("{checked} records, {violations} violations, max ratio {worst:.6}{extra}"),
    }
}

fn criterion_ordering(set: &[InstanceOutcome]) -> Criterion {
    let unordered = set.iter().filter(|o| !o.ordered).count();
    let mut homogeneous = 0;
    let mut unequal = 0;
    for o in set.iter().filter(|o| o.homogeneous) {
        homogeneous += 1;
        let left = bound_of(o, BoundName::GramLeft);
        let right = bound_of(o, BoundName::GramRight);
        if (left - right).abs() > ORDERING_REL_TOL * right {
            unequal += 1;
        }
    }
    Criterion {
        id: 3,
        name: "gram_left <= gram_right, equal on homogeneous norms",
        pass: unordered == 0 && unequal == 0 && homogeneous > 0,
        detail: format!(
            "{unordered} ordering violations; {unequal} of {homogeneous} homogeneous instances unequal"
        ),
    }
}

fn criterion_replication() -> Criterion {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (t, (m, n, rank)) in [(5, 3, 3), (4, 7, 2), (9, 9, 9), (1, 6, 1), (12, 5, 4)]
        .into_iter()
        .enumerate()
    {
        let a: Matrix = gen_block(m, n, rank, derive_seed(MASTER ^ 5, t as u64)).unwrap();
        let sv = singular_values(&a).unwrap();
        for k in 1..=6 {
            let copies = vec![a.clone(); k];
            let svk = singular_values(&concat_h(&copies).unwrap()).unwrap();
            let root = (k as f64).sqrt();
            for (i, &s) in sv.iter().enumerate() {
                let rel = (svk[i] - root * s).abs() / (root * sv[0]);
                worst = worst.max(rel);
            }
            cases += 1;
        }
    }
    Criterion {
        id: 5,
        name: "k copies scale singular values by sqrt(k)",
        pass: worst <= 1e-10,
        detail: format!("{cases} cases, max relative error {worst:.3e}"),
    }
}

fn criterion_sweep() -> Criterion {
    let cfg = TrialConfig {
        m: 8,
        n: 5,
        k: 4,
        base_rank: 4,
        eps: 0.0,
        seed: MASTER,
        trials: 20,
        homogeneous: false,
    };
    let grid = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let rows = run_continuity_sweep::<f64>(&cfg, &grid).unwrap();
    let under = rows.iter().all(|r| r.sound);
    let decays = sweep_decays(&rows);
    let first = rows[0].max_deviation;
    let last = rows[rows.len() - 1].max_deviation;
    Criterion {
        id: 7,
        name: "continuity envelope over six decades, k = 4",
        pass: under && decays == Some(true),
        detail: format!(
            "all under envelope: {under}; deviation {first:.3e} -> {last:.3e} ({:.1e}x decay)",
            first / last
        ),
    }
}

/// Streams of 20 blocks built from a few drifting references with noise
/// spanning 1e-4 to 1e-1.
fn noisy_stream(seed: u64) -> (Vec<Matrix>, SpectralBudget) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(3..=8);
    let n = rng.gen_range(2..=6);
    let rank = rng.gen_range(1..=m.min(n));
    let r = rng.gen_range(1..=rank);
    let tau = 10f64.powf(rng.gen_range(-2.0..0.0));
    let mut blocks = Vec::with_capacity(20);
    let mut reference: Matrix = gen_block(m, n, rank, derive_seed(seed, 0)).unwrap();
    for j in 1..=20u64 {
        if rng.gen_bool(0.15) {
            reference = gen_block(m, n, rank, derive_seed(seed, 100 + j)).unwrap();
        }
        let eps = 10f64.powf(rng.gen_range(-4.0..-1.0));
        let e: Matrix = gen_perturbation(m, n, eps, derive_seed(seed, j)).unwrap();
        blocks.push(reference.add(&e));
    }
    (blocks, SpectralBudget::new(r, tau).unwrap())
}

fn criterion_planner() -> Criterion {
    let mut certified = 0;
    let mut breaches = 0;
    let mut worst = 0.0f64;
    for s in 0..100u64 {
        let (blocks, budget) = noisy_stream(derive_seed(MASTER ^ 8, s));
        let plan = plan_groups(&blocks, &budget, None, PlannerMode::SqrtK).unwrap();
        let deviations = certify_plan(&plan, &blocks).unwrap();
        for (g, dev) in plan.groups.iter().zip(deviations) {
            if g.is_certified() {
                certified += 1;
                worst = worst.max(dev / budget.tolerance());
                if dev > budget.tolerance() {
                    breaches += 1;
                }
            }
        }
    }

    let a0 = Matrix::identity(4);
    let mut stream = vec![a0.clone()];
    for j in 1..30 {
        stream.push(a0.add(&gen_perturbation(4, 4, 0.01, derive_seed(MASTER ^ 88, j)).unwrap()));
    }
    let budget = SpectralBudget::new(4, 0.1).unwrap();
    let plan = plan_groups(&stream, &budget, None, PlannerMode::SqrtK).unwrap();
    let first = plan.groups[0].k();
    Criterion {
        id: 8,
        name: "planner groups stay within tau; boundary group size 24",
        pass: breaches == 0 && certified > 0 && first == 24,
        detail: format!(
            "{certified} certified groups over 100 streams, {breaches} exceed tau, max dev/tau {worst:.4}; boundary first group {first}"
        ),
    }
}

fn criterion_compressor() -> Criterion {
    let mut worst = 0.0f64;
    let mut groups = 0;
    for t in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(MASTER ^ 9, t));
        let m = rng.gen_range(2..=10);
        let n = rng.gen_range(1..=6);
        let k: usize = rng.gen_range(1..=5);
        let rank = rng.gen_range(1..=m.min(n));
        let blocks: Vec<Matrix> = (0..k as u64)
            .map(|j| {
                let a: Matrix = gen_block(m, n, rank, derive_seed(t, j)).unwrap();
                a.add(&gen_perturbation(m, n, 0.05, derive_seed(t, 50 + j)).unwrap())
            })
            .collect();
        let sv = singular_values(&concat_h(&blocks).unwrap()).unwrap();
        for (r, &tail) in sv.iter().enumerate().take(m.min(k * n)).skip(1) {
            let g = compress_group(&blocks, r).unwrap();
            let err = group_reconstruction_error(&g, &blocks).unwrap();
            worst = worst.max((err.concatenated - tail).abs());
            groups += 1;
        }
    }
    let stats = storage_accounting(100, 10, 20, 5, None).unwrap();
    let printed = real(stats.ratio).to_string();
    let expected = real(1500.0 / 11100.0).to_string();
    let storage_ok = stats.joint_scalars == 1500
        && stats.separate_scalars == 11100
        && printed == expected
        && printed.starts_with("1.3513513513513514");
    Criterion {
        id: 9,
        name: "Eckart-Young reconstruction error and storage accounting",
        pass: worst <= 1e-9 && groups > 0 && storage_ok,
        detail: format!(
            "{groups} truncations, max |err - sigma_(r+1)| {worst:.3e}; storage {}/{} = {printed}",
            stats.joint_scalars, stats.separate_scalars
        ),
    }
}

fn criterion_determinism() -> Criterion {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_blockspec"))
            .args(["verify", "--seed", "20240611", "--trials", "50"])
            .output()
            .expect("binary runs")
    };
    let a = run();
    let b = run();
    let same = a.stdout == b.stdout;
    Criterion {
        id: 10,
        name: "verify reports are byte-identical for a fixed seed",
        pass: same
            && !a.stdout.is_empty()
            && a.status.code() == Some(0)
            && b.status.code() == Some(0),
        detail: format!(
            "{} bytes, identical: {same}, exit codes {:?}/{:?}",
            a.stdout.len(),
            a.status.code(),
            b.status.code()
        ),
    }
}

#[test]
fn acceptance() {
    let (set, seconds) = instance_set();
    let mut results = vec![
        criterion_soundness(
            1,
            "left Gram difference bound",
            &set,
            &[BoundName::GramLeft],
            &format!(", instance set evaluated in {seconds:.2} s"),
        ),
        criterion_soundness(
            2,
            "right Gram difference bound",
            &set,
            &[BoundName::GramRight],
            "",
        ),
        criterion_ordering(&set),
        criterion_soundness(
            4,
            "per-index singular value deviation bounds",
            &set,
            &[BoundName::SvNonzero, BoundName::SvZero],
            "",
        ),
        criterion_replication(),
        criterion_soundness(
            6,
            "block-norm bound on assembled grids",
            &set,
            &[BoundName::BlockNorm],
            "",
        ),
        criterion_sweep(),
        criterion_planner(),
        criterion_compressor(),
        criterion_determinism(),
    ];
    if seconds >= 30.0 {
        results[0].pass = false;
    }
    for c in &results {
        println!(
            "criterion {:>2} {}: {} ({})",
            c.id,
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let failed: Vec<u32> = results.iter().filter(|c| !c.pass).map(|c| c.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
