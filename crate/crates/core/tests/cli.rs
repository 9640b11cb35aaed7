use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dcaf::logio::{read_report, ReportKind};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/two_requests.jsonl");

fn dcaf(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcaf"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = dcaf(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn out_dir() -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    (tmp, out)
}

#[test]
fn solve_fixture() {
    let (_tmp, out) = out_dir();
    ok(&out, &["solve", "--input", FIXTURE, "--costs", "1,2", "--budget", "3"]);
    let t = read_report(&out.join("solve.csv")).unwrap();
    assert_eq!(t.kind, ReportKind::Solve);
    let lambda = t.floats("lambda_star").unwrap()[0];
    assert!((0.5..=1.0).contains(&lambda), "lambda* {lambda}");
    assert_eq!(t.floats("achieved_cost").unwrap(), [3.0]);
    assert_eq!(t.floats("achieved_gain").unwrap(), [4.0]);
}

#[test]
fn allocate_at_zero_price_serves_everything_at_max() {
    let (_tmp, out) = out_dir();
    ok(&out, &["allocate", "--input", FIXTURE, "--costs", "1,2", "--lambda", "0"]);
    let t = read_report(&out.join("assignment.csv")).unwrap();
    assert_eq!(t.floats("action").unwrap(), [1.0, 1.0]);
    assert_eq!(t.floats("gain").unwrap(), [1.5, 3.0]);
}

#[test]
fn oracle_allocation_matches_hand_solution() {
    let (_tmp, out) = out_dir();
    let stdout = ok(&out, &["allocate", "--input", FIXTURE, "--costs", "1,2", "--budget", "3", "--oracle"]);
    assert!(!stdout.contains("exceeds the budget"));
    let t = read_report(&out.join("assignment.csv")).unwrap();
    // a at the cheap action, b at the expensive one: gain 1 + 3
    assert_eq!(t.floats("action").unwrap(), [0.0, 1.0]);
    assert_eq!(t.floats("gain").unwrap().iter().sum::<f64>(), 4.0);
}

#[test]
fn zero_traffic_simulation() {
    let (_tmp, out) = out_dir();
    ok(&out, &["simulate", "--policy", "dcaf", "--base-rate", "0", "--ticks", "20"]);
    let t = read_report(&out.join("fig6.csv")).unwrap();
    assert_eq!(t.rows.len(), 20);
    for col in ["arrivals", "served", "failed", "fail_rate", "total_cost", "total_gain"] {
        assert!(t.floats(col).unwrap().iter().all(|v| *v == 0.0 && v.is_sign_positive()), "{col}");
    }
}

#[test]
fn compare_writes_all_reports() {
    let (_tmp, out) = out_dir();
    ok(&out, &["simulate", "--ticks", "80", "--spike-tick", "30"]);
    for f in ["fig4.csv", "fig6.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let t = read_report(&out.join("fig4.csv")).unwrap();
    assert_eq!(t.kind, ReportKind::Fig4);
    let report = ok(&out, &["report"]);
    assert!(report.contains("fig6.csv"));
}

#[test]
fn generated_dataset_feeds_solve_and_sweep() {
    let (_tmp, out) = out_dir();
    ok(&out, &["--seed", "3", "gen", "--fit-estimator"]);
    let data = out.join("dataset.jsonl");
    assert!(out.join("estimator.txt").exists());
    let data = data.to_str().unwrap();
    ok(&out, &["solve", "--input", data, "--budget-fraction", "0.4"]);
    ok(&out, &["sweep", "--input", data, "--points", "10"]);
    let sweep = read_report(&out.join("fig3.csv")).unwrap();
    let gains = sweep.floats("total_gain").unwrap();
    assert!(!gains.is_empty());
}

#[test]
fn bad_config_fails_with_one_line_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let o = dcaf(&tmp.path().join("out"), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert!(!o.status.success());
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(stderr.starts_with("error:"), "{stderr}");
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
}

#[test]
fn missing_input_is_an_error() {
    let (_tmp, out) = out_dir();
    let o = dcaf(&out, &["solve", "--input", "does-not-exist.jsonl"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("does-not-exist.jsonl"));
}
