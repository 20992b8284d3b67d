//! CLI behavior: exit codes, config handling, output determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bigkeylab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bigkeylab"))
        .args(args)
        .current_dir(dir)
        .env_remove("BIGKEYLAB_OUT")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Fast override set for scenarios that would otherwise run the full-size
/// statistical budgets.
const FAST: &[&str] = &[
    "--delta",
    "0.15",
    "--lambda-est",
    "16",
    "--trials",
    "20",
    "--runs",
    "2",
    "--gate-trials",
    "100",
    "--perturb-trials",
    "30",
    "--incompr-trials",
    "10000",
    "--pac-seeds",
    "2",
];

#[test]
fn dump_config_roundtrips_through_the_parser() {
    let dir = tempfile::tempdir().unwrap();
    let out = bigkeylab(&["--dump-config", "--seed", "99"], dir.path());
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("master_seed = 99"));

    // feeding the dump back as a config file reproduces the same dump
    let cfg_path = dir.path().join("lab.cfg");
    std::fs::write(&cfg_path, &text).unwrap();
    let again = bigkeylab(
        &["--config", cfg_path.to_str().unwrap(), "--dump-config"],
        dir.path(),
    );
    assert_eq!(code(&again), 0);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bigkeylab(&["--config", "nope.cfg", "known-metric"], dir.path());
    assert_eq!(code(&out), 2);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("nope.cfg"), "diagnostic names the file: {err}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bigkeylab(&["known-metric", "--warp"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn invalid_parameters_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    // subject index out of range for n
    let out = bigkeylab(&["adaptive-attack", "--subject", "partial-keys:9"], dir.path());
    assert_eq!(code(&out), 2);
    // majority scenario needs t_class > n/2
    let out = bigkeylab(&["majority", "--t-class", "3"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn no_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bigkeylab(&["--seed", "1"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn passing_scenario_exits_zero_and_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["known-metric", "--seed", "5", "--out", "r"];
    args.extend_from_slice(FAST);
    let out = bigkeylab(&args, dir.path());
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let records = std::fs::read_to_string(dir.path().join("r/records.jsonl")).unwrap();
    let record: serde_json::Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(record["scenario"], "known-metric");
    assert_eq!(record["pass"], true);
    assert!(dir.path().join("r/summary.txt").exists());
}

#[test]
fn failing_scenario_exits_one() {
    // the partial-keys subject trips the detection-exactness check
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["adaptive-attack", "--seed", "5", "--out", "r"];
    args.extend_from_slice(FAST);
    let out = bigkeylab(&args, dir.path());
    assert_eq!(code(&out), 1);
    let records = std::fs::read_to_string(dir.path().join("r/records.jsonl")).unwrap();
    let record: serde_json::Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(record["pass"], false);
    assert_eq!(record["detection_exact_runs"], 0);
    assert_eq!(record["max_fooling_gap"], 0.0);
    assert_eq!(record["admissibility_all_confirmed"], true);
}

#[test]
fn adaptive_attack_on_full_key_subject_records_abort_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "adaptive-attack",
        "--seed",
        "5",
        "--out",
        "r",
        "--subject",
        "all-keys",
    ];
    args.extend_from_slice(FAST);
    let out = bigkeylab(&args, dir.path());
    assert_eq!(code(&out), 0, "abort is the expected outcome for this subject");
    let records = std::fs::read_to_string(dir.path().join("r/records.jsonl")).unwrap();
    let record: serde_json::Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(record["pass"], true);
    assert_eq!(record["aborted_runs"], 2);
    let reason = record["runs"][0]["abort_reason"].as_str().unwrap();
    assert!(reason.starts_with("too-many-sensitive"));
}

#[test]
fn same_seed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out_name in ["a", "b"] {
        let mut args = vec!["pac-learn", "--seed", "11", "--out", out_name];
        args.extend_from_slice(FAST);
        let out = bigkeylab(&args, dir.path());
        assert_eq!(code(&out), 0);
    }
    for file in ["records.jsonl", "summary.txt"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["incompressibility", "--seed", "3"];
    args.extend_from_slice(FAST);
    let out = Command::new(env!("CARGO_BIN_EXE_bigkeylab"))
        .args(&args)
        .current_dir(dir.path())
        .env("BIGKEYLAB_OUT", "env-out")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("env-out/records.jsonl").exists());

    // the --out flag wins over the environment
    let mut args = vec!["incompressibility", "--seed", "3", "--out", "flag-out"];
    args.extend_from_slice(FAST);
    let out = Command::new(env!("CARGO_BIN_EXE_bigkeylab"))
        .args(&args)
        .current_dir(dir.path())
        .env("BIGKEYLAB_OUT", "env-out-2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("flag-out/records.jsonl").exists());
    assert!(!dir.path().join("env-out-2").exists());
}
