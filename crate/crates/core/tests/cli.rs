use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lum(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lum"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON payload")
}

#[test]
fn default_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = lum(&["verify", "--seed", "0"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_eq!(v["total_violations"], 0);
    let labels: Vec<&str> = v["sweeps"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["label"].as_str().unwrap())
        .collect();
    assert!(labels.contains(&"p=inf"));
    assert!(labels.contains(&"p=0 q=inf"), "{labels:?}");
    assert!(labels.iter().any(|l| l.contains("tau=2")));
}

#[test]
fn verify_exponential_tail_reports_sqrt2() {
    let dir = tempfile::tempdir().unwrap();
    let out = lum(
        &["verify", "--p", "0", "--q", "inf", "--trials", "1000"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let bound = &v["sweeps"][0]["bound"];
    assert_eq!(
        bound["constant"].as_f64().unwrap(),
        std::f64::consts::SQRT_2
    );
    assert_eq!(bound["exponent"].as_f64().unwrap(), 0.5);
    assert_eq!(bound["regime"], "p_zero_q_inf");
    assert_eq!(v["sweeps"][0]["report"]["trials"], 1000);
}

#[test]
fn verify_noise_regime_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = lum(
        &[
            "verify", "--q", "1", "--tau", "1", "--c-tau", "1", "--trials", "200", "--rows",
            "rows.csv", "--format", "csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "tsybakov");
    assert!((row[2].parse::<f64>().unwrap() - 6.349604).abs() < 1e-6);
    let rows = std::fs::read_to_string(dir.path().join("rows.csv")).unwrap();
    assert!(rows.starts_with("trial,p,q,tau,c_tau,n_atoms,generator,lhs,rhs,slack\n"));
    assert_eq!(rows.lines().count(), 201);
}

#[test]
fn malformed_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    let out = lum(&["--config", "bad.json", "verify"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    std::fs::write(
        dir.path().join("unknown.json"),
        r#"{"verify": {"trails": 10}}"#,
    )
    .unwrap();
    assert_eq!(
        lum(&["--config", "unknown.json", "verify"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        lum(&["verify", "--trials", "many"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn config_values_apply_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"seed": 3, "verify": {"p": 2, "q": 1, "trials": 50}}"#,
    )
    .unwrap();
    let v = json(&lum(
        &["--config", "c.json", "verify", "--trials", "70"],
        dir.path(),
    ));
    assert_eq!(v["seed"], 3);
    assert_eq!(v["sweeps"][0]["report"]["trials"], 70);
    assert_eq!(v["sweeps"][0]["bound"]["constant"].as_f64().unwrap(), 1.5);
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // two well separated clouds in 2-D
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for i in 0..20 {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        features.push(vec![y * (1.0 + 0.1 * i as f64), 0.3 * (i as f64 - 10.0)]);
        labels.push(y as i8);
    }
    let data = serde_json::json!({ "features": features, "labels": labels });
    std::fs::write(d.join("data.json"), data.to_string()).unwrap();

    let out = lum(
        &[
            "train",
            "--data",
            "data.json",
            "--lambda",
            "1e-4",
            "--out",
            "model.json",
            "--trace",
            "trace.csv",
        ],
        d,
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let model: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["w"].as_array().unwrap().len(), 2);
    assert!(std::fs::read_to_string(d.join("trace.csv"))
        .unwrap()
        .starts_with("iter,objective,grad_norm\n"));

    let v = json(&lum(
        &["evaluate", "--model", "model.json", "--data", "data.json"],
        d,
    ));
    assert_eq!(v["misclassification_rate"], 0.0);
    assert_eq!(v["n"], 20);
}

#[test]
fn evaluate_zero_model_on_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        lum(
            &[
                "sample", "--kind", "tsybakov", "--tau", "2", "--atoms", "30", "--out", "dist.csv",
                "--format", "csv"
            ],
            d
        )
        .status
        .code(),
        Some(0)
    );
    std::fs::write(d.join("zero.json"), r#"{"w": [0.0], "b": 0.0}"#).unwrap();
    let v = json(&lum(
        &[
            "evaluate",
            "--model",
            "zero.json",
            "--dist",
            "dist.csv",
            "--p",
            "1",
            "--q",
            "1",
        ],
        d,
    ));
    assert_eq!(v["generalization_error"].as_f64().unwrap(), 1.0);

    std::fs::write(d.join("wide.json"), r#"{"w": [0.0, 1.0], "b": 0.0}"#).unwrap();
    let out = lum(
        &["evaluate", "--model", "wide.json", "--dist", "dist.csv"],
        d,
    );
    assert_eq!(out.status.code(), Some(2));
    let out = lum(
        &["evaluate", "--model", "missing.json", "--dist", "dist.csv"],
        d,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_outputs_parse() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let v = json(&lum(&["sample", "--dim", "7", "--n-per-class", "3"], d));
    assert_eq!(v["features"].as_array().unwrap().len(), 6);
    assert_eq!(v["features"][0].as_array().unwrap().len(), 7);
    lum(&["sample", "--kind", "tsybakov", "--out", "dist.json"], d);
    let out = lum(
        &[
            "sample",
            "--dist",
            "dist.json",
            "--n",
            "25",
            "--format",
            "csv",
        ],
        d,
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("label,x0\n"));
    assert_eq!(text.lines().count(), 26);
    assert_eq!(
        lum(&["sample", "--kind", "joint"], d).status.code(),
        Some(2)
    );
}

#[test]
fn tabulate_json_uses_null_for_infinite_minimizer() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&lum(
        &[
            "tabulate",
            "--p",
            "1",
            "--q",
            "1",
            "--resolution",
            "5",
            "--format",
            "json",
        ],
        dir.path(),
    ));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows[0]["f_p"].is_null());
    assert_eq!(rows[2]["g"], 0.0);
}

#[test]
fn piling_direction_at_seed_7() {
    let dir = tempfile::tempdir().unwrap();
    let out = lum(
        &[
            "piling",
            "--dim",
            "500",
            "--n-per-class",
            "25",
            "--seed",
            "7",
            "--n-seeds",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["report"]["seeds"], serde_json::json!([7]));
    assert!(
        v["report"]["smooth_median"].as_f64().unwrap()
            < v["report"]["near_hinge_median"].as_f64().unwrap()
    );
    assert_eq!(v["near_hinge_piles_more"], true);
}
