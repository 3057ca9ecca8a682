use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use blockspec::harness::{derive_seed, gen_block, gen_perturbation};
use blockspec::{container, CompressedGroup, Matrix};
use blockspec_cli::commands::VerifyArgs;
use blockspec_cli::matrix_io::write_matrix_csv;
use blockspec_cli::{cmd_verify, BoundName};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blockspec"))
}

struct Run {
    code: i32,
    json: Option<Value>,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let Output {
        status,
        stdout,
        stderr,
    } = bin().args(args).output().expect("binary runs");
    Run {
        code: status.code().expect("exit code"),
        json: serde_json::from_slice(&stdout).ok(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
    }
}

fn num(v: &Value) -> f64 {
    v.as_f64()
        .unwrap_or_else(|| v.to_string().parse().expect("number"))
}

/// Writes the blocks as CSV plus a manifest; returns the manifest path.
fn workspace(dir: &TempDir, blocks: &[Matrix], rank: usize, tau: f64) -> PathBuf {
    let mut names = Vec::new();
    for (i, b) in blocks.iter().enumerate() {
        let name = format!("block{i:02}.csv");
        write_matrix_csv(&dir.path().join(&name), b).unwrap();
        names.push(name);
    }
    manifest(dir.path(), &names, rank, tau)
}

fn manifest(dir: &Path, names: &[String], rank: usize, tau: f64) -> PathBuf {
    let m = serde_json::json!({
        "schema_version": 1,
        "block_paths": names,
        "budget": {"target_rank": rank, "tolerance": tau},
        "reference_policy": "first-of-group",
    });
    let path = dir.join("manifest.json");
    std::fs::write(&path, m.to_string()).unwrap();
    path
}

fn boundary_stream() -> Vec<Matrix> {
    let a0 = Matrix::identity(4);
    let mut blocks = vec![a0.clone()];
    for j in 1..30 {
        blocks.push(a0.add(&gen_perturbation(4, 4, 0.01, derive_seed(7, j)).unwrap()));
    }
    blocks
}

#[test]
fn bounds_two_block_example() {
    let dir = TempDir::new().unwrap();
    let blocks = [Matrix::identity(2), Matrix::identity(2).scale(1.1)];
    let m = workspace(&dir, &blocks, 2, 0.5);
    let r = run(&["bounds", "--manifest", m.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let res = &r.json.unwrap()["result"];
    for b in res["nonzero_index_bounds"].as_array().unwrap() {
        assert!((num(b) - 0.148492424049175).abs() < 1e-12);
    }
    assert!((num(&res["gram_left_bound"]) - 0.21).abs() < 1e-12);
    assert_eq!(res["measured_within_bounds"], Value::Bool(true));
    let dev = num(&res["measured_nonzero_index_deviations"][0]);
    assert!((dev - (2.21f64.sqrt() - 2f64.sqrt())).abs() < 1e-12);
}

#[test]
fn bounds_identical_blocks_are_zero() {
    let dir = TempDir::new().unwrap();
    let a: Matrix = gen_block(5, 3, 3, 11).unwrap();
    let m = workspace(&dir, &[a.clone(), a.clone(), a], 2, 0.1);
    let r = run(&["bounds", "--manifest", m.to_str().unwrap()]);
    assert_eq!(r.code, 0);
    let res = &r.json.unwrap()["result"];
    assert_eq!(num(&res["gram_left_bound"]), 0.0);
    assert_eq!(num(&res["gram_right_bound"]), 0.0);
    assert_eq!(num(&res["zero_index_bound"]), 0.0);
    assert!(res["nonzero_index_bounds"]
        .as_array()
        .unwrap()
        .iter()
        .all(|b| num(b) == 0.0));
    assert_eq!(res["kmax"], Value::from("unbounded"));
}

#[test]
fn missing_block_file_exits_2_naming_it() {
    let dir = TempDir::new().unwrap();
    let m = manifest(dir.path(), &["nowhere.csv".into()], 1, 0.1);
    for cmd in ["bounds", "plan"] {
        let r = run(&[cmd, "--manifest", m.to_str().unwrap()]);
        assert_eq!(r.code, 2);
        assert!(r.stderr.contains("nowhere.csv"), "{}", r.stderr);
        assert!(r.json.is_none());
    }
    let r = run(&["bounds", "--manifest", "/no/such/manifest.json"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("/no/such/manifest.json"));
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "1,2\nfoo,3\n").unwrap();
    let m = manifest(dir.path(), &["bad.csv".into()], 1, 0.1);
    let r = run(&["bounds", "--manifest", m.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("bad.csv"));

    std::fs::write(&m, "{\"schema_version\": 1").unwrap();
    let r = run(&["plan", "--manifest", m.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("manifest.json"));

    let r = run(&["bogus"]);
    assert_eq!(r.code, 2);
}

#[test]
fn shape_mismatch_exits_3_naming_the_file() {
    let dir = TempDir::new().unwrap();
    let blocks = [
        Matrix::identity(3),
        Matrix::identity(3),
        Matrix::zeros(3, 2),
    ];
    let m = workspace(&dir, &blocks, 1, 0.1);
    for cmd in ["bounds", "plan"] {
        let r = run(&[cmd, "--manifest", m.to_str().unwrap()]);
        assert_eq!(r.code, 3, "{cmd}: {}", r.stderr);
        assert!(r.stderr.contains("block02.csv"), "{}", r.stderr);
    }
    std::fs::write(dir.path().join("block01.csv"), "1,0,0\n0,1\n0,0,1\n").unwrap();
    let r = run(&["bounds", "--manifest", m.to_str().unwrap()]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("block01.csv"));
}

#[test]
fn rank_deficient_reference_exits_4() {
    let dir = TempDir::new().unwrap();
    let a: Matrix = gen_block(4, 4, 1, 3).unwrap();
    let m = workspace(&dir, &[a.clone(), a], 2, 0.1);
    let r = run(&["bounds", "--manifest", m.to_str().unwrap()]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("block00.csv"));

    let r = run(&["plan", "--manifest", m.to_str().unwrap()]);
    assert_eq!(r.code, 4);
    let res = &r.json.expect("plan still reports")["result"];
    assert_eq!(res["uncertified_references"], serde_json::json!([0, 1]));

    let out = dir.path().join("out.bspc");
    let r = run(&[
        "compress",
        "--manifest",
        m.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 4);
    assert!(!out.exists());

    let r = run(&["bounds", "--manifest", m.to_str().unwrap(), "--rank", "1"]);
    assert_eq!(r.code, 0);
}

#[test]
fn plan_boundary_stream() {
    let dir = TempDir::new().unwrap();
    let m = workspace(&dir, &boundary_stream(), 4, 0.1);
    let m = m.to_str().unwrap();

    let r = run(&["plan", "--manifest", m]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let res = &r.json.unwrap()["result"];
    assert_eq!(res["group_sizes"], serde_json::json!([24, 6]));
    for g in res["groups"].as_array().unwrap() {
        assert_eq!(g["certified"], Value::Bool(true));
        assert!(num(&g["certified_bound"]) <= 0.1);
        assert!(num(&g["measured_deviation"]) <= num(&g["certified_bound"]));
    }

    let r = run(&["plan", "--manifest", m, "--strict-paper-k", "false"]);
    assert_eq!(r.json.unwrap()["result"]["group_sizes"][0], Value::from(26));

    let r = run(&["plan", "--manifest", m, "--tau", "1e9"]);
    assert_eq!(r.json.unwrap()["result"]["group_count"], Value::from(1));

    let r = run(&["plan", "--manifest", m, "--tau", "0"]);
    assert_eq!(r.code, 2);
}

#[test]
fn plan_identical_blocks_one_group() {
    let dir = TempDir::new().unwrap();
    let a: Matrix = gen_block(6, 3, 3, 19).unwrap();
    let m = workspace(&dir, &vec![a; 9], 3, 1e-8);
    let r = run(&["plan", "--manifest", m.to_str().unwrap()]);
    assert_eq!(r.code, 0);
    let res = &r.json.unwrap()["result"];
    assert_eq!(res["group_count"], Value::from(1));
    assert_eq!(num(&res["groups"][0]["certified_bound"]), 0.0);
}

#[test]
fn compress_roundtrip_and_lossless_rank() {
    let dir = TempDir::new().unwrap();
    let stream = boundary_stream();
    let m = workspace(&dir, &stream, 4, 0.1);
    let out = dir.path().join("groups.bspc");
    let r = run(&[
        "compress",
        "--manifest",
        m.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let res = &r.json.unwrap()["result"];
    assert_eq!(res["roundtrip_bit_exact"], Value::Bool(true));
    assert!(num(&res["max_reconstruction_error"]) <= 1e-9);
    assert_eq!(res["group_count"], Value::from(2));
    // groups of 24 and 6 blocks, 4x4, rank 4
    let joint = (4 * 4 + 24 * 4 * 4) + (4 * 4 + 6 * 4 * 4);
    assert_eq!(res["joint_scalars"], Value::from(joint));
    assert_eq!(res["separate_scalars"], Value::from(30 * 4 * 9));

    let bytes = std::fs::read(&out).unwrap();
    assert_eq!(&bytes[..5], b"BSPC1");
    assert_eq!(res["container_bytes"], Value::from(bytes.len()));
    let groups: Vec<CompressedGroup> = container::decode(&bytes).unwrap();
    assert_eq!(
        groups.iter().map(|g| g.k()).collect::<Vec<_>>(),
        vec![24, 6]
    );
    let rebuilt = blockspec::compressor::reconstruct_block(&groups[1], 2).unwrap();
    let original = &stream[26];
    let diff = rebuilt.sub(original).max_abs();
    assert!(diff <= 1e-9, "{diff}");
}

#[test]
fn compress_rank_too_large_exits_5() {
    let dir = TempDir::new().unwrap();
    let a: Matrix = gen_block(3, 2, 2, 1).unwrap();
    let m = workspace(&dir, &[a.clone(), a], 1, 0.1);
    let out = dir.path().join("x.bspc");
    let r = run(&[
        "compress",
        "--manifest",
        m.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--rank",
        "4",
    ]);
    assert_eq!(r.code, 5, "{}", r.stderr);
    assert!(!out.exists());

    let r = run(&["compress", "--manifest", m.to_str().unwrap()]);
    assert_eq!(r.code, 2);
}

#[test]
fn compress_unwritable_output_exits_2() {
    let dir = TempDir::new().unwrap();
    let m = workspace(&dir, &[Matrix::identity(2)], 1, 0.1);
    let out = dir.path().join("missing-dir").join("x.bspc");
    let r = run(&[
        "compress",
        "--manifest",
        m.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("missing-dir"));
}

#[test]
fn verify_exit_codes() {
    let r = run(&["verify", "--seed", "3", "--trials", "30", "--eps", "0"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let res = &r.json.unwrap()["result"];
    assert_eq!(res["sound"], Value::Bool(true));
    for entry in res["max_ratios"].as_array().unwrap() {
        if entry["bound"] != "block_norm" {
            assert_eq!(num(&entry["max_ratio"]), 0.0, "{entry}");
        }
    }

    let r = run(&["verify", "--seed", "3", "--trials", "100"]);
    assert_eq!(r.code, 0);

    let r = run(&["verify", "--trials", "3"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("--seed"));

    let r = run(&[
        "verify", "--seed", "1", "--m", "3", "--n", "2", "--rank", "3",
    ]);
    assert_eq!(r.code, 5);

    let r = run(&["verify", "--seed", "1", "--trials", "0"]);
    assert_eq!(r.code, 2);
}

#[test]
fn verify_status_follows_soundness_under_injected_fault() {
    let args = VerifyArgs {
        m: 6,
        n: 4,
        k: 3,
        rank: 3,
        eps: 0.05,
        seed: Some(9),
        trials: 10,
        homogeneous: false,
    };
    let clean = cmd_verify(&args, None).unwrap();
    assert_eq!(clean.status, 0);

    let halve = |name: BoundName, b: f64| {
        if name == BoundName::GramLeft {
            b * 1e-3
        } else {
            b
        }
    };
    let broken = cmd_verify(&args, Some(&halve)).unwrap();
    assert_eq!(broken.status, 6);
    let res = &broken.report["result"];
    assert_eq!(res["sound"], Value::Bool(false));
    assert!(res["violation_count"].as_u64().unwrap() > 0);
    assert_eq!(res["violations"][0]["bound"], Value::from("gram_left"));
}

#[test]
fn sweep_reports() {
    let r = run(&["sweep", "--seed", "5"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let res = &r.json.unwrap()["result"];
    assert_eq!(res["rows"].as_array().unwrap().len(), 6);
    assert_eq!(res["decays_tenfold"], Value::Bool(true));
    let csv = res["csv"].as_str().unwrap();
    assert!(csv.starts_with("eps,max_deviation,envelope,max_ratio,sound\n"));
    assert_eq!(csv.lines().count(), 7);

    let r = run(&["sweep", "--seed", "5", "--eps-grid", "0.01"]);
    assert_eq!(r.code, 0);
    let res = &r.json.unwrap()["result"];
    assert_eq!(res["rows"].as_array().unwrap().len(), 1);
    assert_eq!(res["decays_tenfold"], Value::Null);

    assert_eq!(run(&["sweep", "--seed", "5", "--k", "1"]).code, 2);
    assert_eq!(
        run(&["sweep", "--seed", "5", "--eps-grid", "0.01,0.1"]).code,
        2
    );
    assert_eq!(run(&["sweep"]).code, 2);
}
