//! End-to-end tests of the `sdelab` binary: exit statuses, report files,
//! config resolution, and byte-level reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sdelab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdelab"))
        .args(args)
        .current_dir(dir)
        .env_remove("SDELAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn no_verb_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdelab(&[], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).to_lowercase().contains("usage"));
}

#[test]
fn out_of_range_s_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdelab(&["rate", "--s", "1.2"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("(1/2, 1)"), "{}", stderr(&out));
}

#[test]
fn unknown_drift_and_bad_thread_env_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdelab(&["rate", "--drift", "brownian"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("unknown drift"));

    let out = Command::new(env!("CARGO_BIN_EXE_sdelab"))
        .args(["rate", "--drift", "zero"])
        .current_dir(dir.path())
        .env("SDELAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("SDELAB_THREADS"));
}

#[test]
fn zero_drift_rate_run_writes_reports_and_prints_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdelab(
        &[
            "rate",
            "--drift",
            "zero",
            "--n-list",
            "4,8,16",
            "--fine-steps",
            "256",
            "--reps",
            "100",
            "--seed",
            "7",
            "--out",
            "r",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("exact (errors all zero)"), "{text}");
    assert!(text.contains("wall time"), "{text}");

    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,error,stderr,reps"));
    assert_eq!(lines.next(), Some("4,0,0,100"));

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["drift"], "zero");
    assert_eq!(json["config"]["seed"], 7);
    assert_eq!(json["result"]["fit"]["kind"], "exact");
    assert_eq!(json["result"]["aborted"], 0);
}

#[test]
fn rerun_with_identical_flags_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "rate",
        "--drift",
        "hat",
        "--x0",
        "0.5",
        "--n-list",
        "4,8,16",
        "--fine-steps",
        "256",
        "--reps",
        "120",
        "--seed",
        "3",
        "--out",
        "h",
    ];
    assert_eq!(sdelab(&args, dir.path()).status.code(), Some(0));
    let csv1 = fs::read(dir.path().join("h.csv")).unwrap();
    let json1 = fs::read(dir.path().join("h.json")).unwrap();
    assert_eq!(sdelab(&args, dir.path()).status.code(), Some(0));
    assert_eq!(csv1, fs::read(dir.path().join("h.csv")).unwrap());
    assert_eq!(json1, fs::read(dir.path().join("h.json")).unwrap());
}

#[test]
fn config_file_resolves_flags_override_and_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"drift": "hat", "n_list": [4, 8, 16], "fine_steps": 256, "reps": 150, "seed": 9, "out": "a"}"#,
    )
    .unwrap();
    // The --reps flag must beat the file's 150.
    let out = sdelab(
        &["rate", "--config", "cfg.json", "--reps", "120"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["reps"], 120);
    assert_eq!(report["config"]["drift"], "hat");

    // Feed the echoed config back with no flags: the rerun must reproduce
    // the report files byte for byte.
    let csv1 = fs::read(dir.path().join("a.csv")).unwrap();
    let json1 = fs::read(dir.path().join("a.json")).unwrap();
    fs::write(
        dir.path().join("echo.json"),
        serde_json::to_string(&report["config"]).unwrap(),
    )
    .unwrap();
    let out = sdelab(&["rate", "--config", "echo.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(csv1, fs::read(dir.path().join("a.csv")).unwrap());
    assert_eq!(json1, fs::read(dir.path().join("a.json")).unwrap());
}

#[test]
fn malformed_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), r#"{"repz": 10}"#).unwrap();
    let out = sdelab(&["rate", "--config", "cfg.json"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("repz"), "{}", stderr(&out));
}

#[test]
fn kappa_quick_run_prints_verdict_and_respects_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdelab(
        &[
            "kappa",
            "--reps",
            "300",
            "--fine-steps",
            "1024",
            "--out",
            "k",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(
        stdout(&out).contains("agreement within 3 standard errors"),
        "{}",
        stdout(&out)
    );
    assert!(dir.path().join("k.json").exists());
    assert!(!dir.path().join("k.csv").exists());
}

#[test]
fn invalid_experiment_shape_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    // fine_steps < 16 * max(n_list)
    let out = sdelab(
        &[
            "rate",
            "--drift",
            "zero",
            "--n-list",
            "4,8,64",
            "--fine-steps",
            "256",
            "--reps",
            "100",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("fine_steps"), "{}", stderr(&out));
}
