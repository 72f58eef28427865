//! The `las` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
run_id = "cli"
day_length = "1h"

[seeds]
sim = 5
agent = 6
visitors = 7

[schedule]
days = 2
modes = ["pb", "pla"]
slot_duration = "2min"

[visitors]
seed = 8

[visitors.generator]
mean_interarrival = "20s"
dwell_min = "20s"
dwell_max = "1min"
behaviours = [["wanderer", 1.0], ["hand_raiser", 1.0]]
"#;

fn las(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_las")).args(args).current_dir(dir).env("RUST_LOG", "warn").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn train_analyze_and_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), CONFIG).unwrap();

    let train = las(&["train", "--config", "run.toml", "--out", "runs"], d);
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    let manifest = stdout(&train).trim().to_string();
    assert!(manifest.ends_with("manifest.json"));
    assert!(d.join("runs/cli/day_2.ckpt").exists());

    let analyze = las(&["analyze", "--manifest", &manifest, "--calibration-window", "0,30", "--out", "report"], d);
    assert!(analyze.status.success(), "{}", String::from_utf8_lossy(&analyze.stderr));
    for name in ["minutes.csv", "summary.csv", "mann_whitney.csv", "daily.csv", "calibration.json"] {
        assert!(d.join("report").join(name).exists(), "{name} missing");
    }
    let summary = fs::read_to_string(d.join("report/summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("pla,e_calibrated,")));

    let cluster = las(&["cluster", "--manifest", &manifest, "--k", "3", "--out", "clusters"], d);
    assert!(cluster.status.success(), "{}", String::from_utf8_lossy(&cluster.stderr));
    let centroids = fs::read_to_string(d.join("clusters/centroids.csv")).unwrap();
    assert_eq!(centroids.lines().count(), 1 + 2 * 3);
    assert!(d.join("clusters/centroid_vs_pb.csv").exists());
}

#[test]
fn simulate_runs_only_pre_scripted_slots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), CONFIG).unwrap();
    let out = las(&["simulate", "--config", "run.toml", "--out", "sim", "--seed", "99"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(d.join("sim/cli/manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&text).unwrap();
    let slots = manifest["slots"].as_array().unwrap();
    assert_eq!(slots.len(), 2);
    assert!(slots.iter().all(|s| s["mode"] == "pb"));
    assert!(!d.join("sim/cli/day_1.ckpt").exists());
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(!las(&["train", "--config", "missing.toml"], d).status.success());
    fs::write(d.join("bad.toml"), "run_id = \"x\"\nunknown = 1\n").unwrap();
    assert!(!las(&["train", "--config", "bad.toml"], d).status.success());
    assert!(!las(&["analyze", "--manifest", "nowhere/manifest.json"], d).status.success());
    assert!(!las(&["analyze", "--manifest", "m.json", "--calibration-window", "5,1"], d).status.success());
}

#[test]
fn short_benchmark_reports_every_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = las(
        &["bench-simplified", "--seeds", "2", "--episodes", "2", "--steps", "50", "--min-converged", "0", "--out", "b"],
        d,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let episodes = fs::read_to_string(d.join("b/episodes.csv")).unwrap();
    assert_eq!(episodes.lines().count(), 1 + 2 * 2);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("b/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seeds"].as_array().unwrap().len(), 2);
    assert_eq!(summary["seeds"][0]["oracle"], 4.0);
}
