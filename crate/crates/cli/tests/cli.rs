use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hpefp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpefp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run hpefp")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hpefp(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Small noisy synthetic set, downsampled and split 15/5 per class.
fn prepare(dir: &Path, seed: &str, sigma: &str, shift: &str) {
    ok(
        dir,
        &[
            "synth", "--classes", "5", "--per-class", "20", "--events", "2", "--samples", "500", "--sigma", sigma,
            "--shift", shift, "--seed", seed, "--out", "raw.csv",
        ],
    );
    ok(dir, &["downsample", "--input", "raw.csv", "--factor", "5", "--out", "d.csv"]);
    ok(
        dir,
        &[
            "split", "--input", "d.csv", "--train-per-class", "15", "--test-per-class", "5", "--seed", "1",
            "--train-out", "train.csv", "--test-out", "test.csv",
        ],
    );
}

#[test]
fn knn_model_round_trips_through_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    prepare(p, "3", "0.1", "0.02");
    ok(p, &["train", "--kind", "knn", "--train", "train.csv", "--out", "knn.json"]);
    let model = json_file(&p.join("knn.json"));
    assert_eq!(model["kind"], "knn");
    assert_eq!(model["provenance"]["train_path"], "train.csv");
    assert_eq!(model["provenance"]["train_digest"].as_str().unwrap().len(), 64);

    let rate = ok(p, &["evaluate", "--model", "knn.json", "--test", "test.csv", "--out", "report.json"]);
    let report = json_file(&p.join("report.json"));
    assert_eq!(rate.trim().parse::<f64>().unwrap(), report["success_rate"].as_f64().unwrap());
    assert_eq!(report["total"], 25);
    assert_eq!(report["meta"]["model_kind"], "knn");
    assert_eq!(report["meta"]["hyperparameters"]["k"], 1);
    let per_class = fs::read_to_string(p.join("report.per_class.csv")).unwrap();
    assert_eq!(per_class.lines().next(), Some("label,correct,total,rate"));
    assert_eq!(per_class.lines().count(), 6);
}

#[test]
fn topk_curve_file_has_one_row_per_guess() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    prepare(p, "5", "3", "0.1");
    ok(p, &["train", "--kind", "dt", "--train", "train.csv", "--out", "dt.json"]);
    ok(p, &["evaluate", "--model", "dt.json", "--test", "test.csv", "--topk", "5", "--out", "r.json"]);
    let csv = fs::read_to_string(p.join("r.topk.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("g,success_rate"));
    let rows: Vec<(usize, f64)> = lines
        .map(|l| {
            let (g, r) = l.split_once(',').unwrap();
            (g.parse().unwrap(), r.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    assert!(rows.windows(2).all(|w| w[0].1 <= w[1].1));
    assert_eq!(rows[4].1, 1.0);
}

#[test]
fn net_pipeline_matches_frozen_rate() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    prepare(p, "3", "3", "0.1");
    ok(
        p,
        &[
            "train", "--kind", "net", "--hyperparameters", r#"{"hidden1":40,"hidden2":10,"seed":1}"#, "--train",
            "train.csv", "--out", "net.json",
        ],
    );
    let rate = ok(p, &["evaluate", "--model", "net.json", "--test", "test.csv", "--out", "r.json"]);
    assert_eq!(rate.trim().parse::<f64>().unwrap(), 0.84);
    assert_eq!(json_file(&p.join("r.json"))["success_rate"].as_f64().unwrap(), 0.84);
}

#[test]
fn synth_is_reproducible_and_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let args = ["synth", "--classes", "30", "--per-class", "50", "--samples", "20", "--seed", "9", "--out"];
    let a = ok(p, &[&args[..], &["a.csv"]].concat());
    let b = ok(p, &[&args[..], &["b.csv"]].concat());
    assert_eq!(a, b);
    assert_eq!(a.trim().len(), 64);
    assert_eq!(fs::read(p.join("a.csv")).unwrap(), fs::read(p.join("b.csv")).unwrap());
    let meta = json_file(&p.join("a.csv.meta.json"));
    assert_eq!(meta["measurements"], 1500);
    assert_eq!(meta["seed"], 9);
    assert_eq!(meta["data_seed"], 10);
    assert_eq!(meta["digest"], a.trim());
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let zero = hpefp(p, &["synth", "--classes", "30", "--per-class", "0", "--out", "x.csv"]);
    assert_eq!(zero.status.code(), Some(2));
    assert!(!p.join("x.csv").exists());

    let bogus = hpefp(p, &["collect", "--scenario", "bogus", "--label", "a", "--out", "t.csv"]);
    assert_eq!(bogus.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bogus.stderr).contains("unknown scenario `bogus`"));

    let missing = hpefp(p, &["evaluate", "--model", "none.json", "--test", "t.csv", "--out", "r.json"]);
    assert_eq!(missing.status.code(), Some(2));

    fs::write(p.join("broken.csv"), "not a dataset\n").unwrap();
    let broken = hpefp(p, &["train", "--kind", "knn", "--train", "broken.csv", "--out", "m.json"]);
    assert_eq!(broken.status.code(), Some(3));

    let kind = hpefp(p, &["train", "--kind", "cnn", "--train", "broken.csv", "--out", "m.json"]);
    assert_eq!(kind.status.code(), Some(2));
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    prepare(p, "3", "0.1", "0.02");
    let config = r#"{
        "dataset": "d.csv",
        "classifier": {"kind": "knn", "hyperparameters": {"k": 3}},
        "split": {"folds": 4, "seed": 2}
    }"#;
    fs::write(p.join("cfg.json"), config).unwrap();
    ok(p, &["--config", "cfg.json", "crossval", "--out", "cv.json"]);
    let cv = json_file(&p.join("cv.json"));
    assert_eq!(cv["kind"], "knn");
    assert_eq!(cv["hyperparameters"]["k"], 3);
    assert_eq!(cv["result"]["k"], 4);
    assert_eq!(cv["result"]["seed"], 2);
    assert_eq!(cv["dataset_digest"].as_str().unwrap().len(), 64);
    assert_eq!(fs::read_to_string(p.join("cv.folds.csv")).unwrap().lines().count(), 5);

    ok(p, &["--config", "cfg.json", "crossval", "--folds", "5", "--hyperparameters", "{}", "--out", "cv5.json"]);
    let cv = json_file(&p.join("cv5.json"));
    assert_eq!(cv["result"]["k"], 5);
    assert_eq!(cv["hyperparameters"], serde_json::json!({}));

    fs::write(p.join("bad.json"), r#"{"datasett": "d.csv"}"#).unwrap();
    let bad = hpefp(p, &["--config", "bad.json", "crossval", "--out", "x.json"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn mitigation_sweep_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    prepare(p, "3", "0.1", "0.02");
    let common = ["--kind", "knn", "--dataset", "d.csv", "--train-per-class", "15", "--test-per-class", "5"];
    ok(p, &[&["mitigate"][..], &common, &["--noise", "0,5", "--out", "m.json"]].concat());
    let m = json_file(&p.join("m.json"));
    let reports = m["result"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["delta"], 0.0);
    assert_eq!(reports[1]["policy"]["kind"], "noise-injection");
    let sweep = fs::read_to_string(p.join("m.sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next(), Some("policy,before,after,delta"));
    assert_eq!(sweep.lines().count(), 3);

    ok(p, &[&["mitigate"][..], &common, &["--deny", "--out", "deny.json"]].concat());
    let after = json_file(&p.join("deny.json"))["result"][0]["after"]["success_rate"].as_f64().unwrap();
    assert!(after <= 0.2 + 1e-12);

    ok(
        p,
        &[
            "curve", "--kind", "knn", "--dataset", "d.csv", "--sizes", "1,5,15", "--test-per-class", "5", "--out",
            "c.json",
        ],
    );
    let csv = fs::read_to_string(p.join("c.curve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn preset_prints_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["preset", "tor-intel"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["config"]["duration_s"], 5.0);
    assert_eq!(v["config"]["events"].as_array().unwrap().len(), 3);
}
