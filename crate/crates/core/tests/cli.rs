use std::path::Path;
use std::process::{Command, Output};

use proba::io::{self, MatchRecord};
use proba::metrics::MetricSummary;

fn proba(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proba"))
        .current_dir(dir)
        .env("PROBA_NUM_WORKERS", "1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn synth_optimize_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&proba(d, &["synth", "--frames", "5", "--points", "200", "--seed", "7"]));
    ok(&proba(d, &["optimize", "--mode", "proba", "--lambda", "1", "--iters", "50"]));
    assert!(d.join("out/trace_seed0.csv").exists());
    let out = proba(d, &["eval"]);
    ok(&out);
    let summary: MetricSummary = serde_json::from_slice(&out.stdout).unwrap();
    assert!((0.0..=100.0).contains(&summary.maa10()));
    assert!(summary.fov_error.is_finite());

    let out = proba(d, &["plot", "--trace", "out/trace_seed0.csv", "--columns", "total,maa10"]);
    ok(&out);
    let svg = std::fs::read_to_string(d.join("out/trace_seed0.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn every_mode_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&proba(d, &["synth", "--frames", "3", "--points", "20"]));
    for mode in ["proba", "ba", "pose", "expose"] {
        let out = format!("out_{mode}");
        ok(&proba(d, &["optimize", "--mode", mode, "--iters", "5", "--out", &out]));
    }
    ok(&proba(d, &["optimize", "--anisotropic", "--iters", "5", "--out", "aniso"]));
    let result: io::RunResult = io::read_json(&d.join("aniso/result_seed0.json")).unwrap();
    assert!(result.anisotropic);
    assert_eq!(result.poses.len(), 3);
}

#[test]
fn lambda_sweep_has_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&proba(d, &["synth", "--frames", "3", "--points", "20"]));
    let out = proba(d, &["sweep-lambda", "--values", "0,0.1,1,10", "--iters", "5"]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "lambda,seed,total,maa5,maa10,maa15,fov_err");
    let lambdas: Vec<f64> = rows[1..].iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(lambdas, vec![0.0, 0.1, 1.0, 10.0]);
    assert_eq!(std::fs::read_to_string(d.join("out/sweep_lambda.csv")).unwrap(), text);
}

#[test]
fn frame_sweep_uses_table_subsets() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&proba(d, &["synth", "--frames", "10", "--points", "12"]));
    let out = proba(d, &["sweep-frames", "--values", "2,4", "--iters", "3"]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    ok(&proba(d, &["synth", "--frames", "4", "--points", "12", "--out", "small.json"]));
    let out = proba(d, &["sweep-frames", "--scene", "small.json", "--iters", "3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_scene_reports_schema_path() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("scene.json"),
        r#"{"frames":[{"id":0,"width":640,"height":480}],"correspondences":[{"i":0,"j":1,"px":1,"py":2,"qx":3,"qy":"x","conf":1}],"meta":{"generator":"hand","units":"pixels"}}"#,
    )
    .unwrap();
    let out = proba(d, &["optimize", "--iters", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("correspondences[0].qy"), "{err}");

    std::fs::write(d.join("run.json"), r#"{"mode":"proba","lamda":1}"#).unwrap();
    let out = proba(d, &["optimize", "--config", "run.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lamda"));
}

#[test]
fn optimize_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&proba(d, &["synth", "--frames", "4", "--points", "30", "--seed", "3"]));
    ok(&proba(d, &["optimize", "--iters", "120", "--seed", "2", "--out", "a"]));
    ok(&proba(d, &["optimize", "--iters", "120", "--seed", "2", "--out", "b"]));
    for file in ["trace_seed2.csv", "result_seed2.json"] {
        assert_eq!(
            std::fs::read(d.join("a").join(file)).unwrap(),
            std::fs::read(d.join("b").join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn ingest_samples_dense_matches() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut lines = String::new();
    for y in 0..64 {
        for x in 0..64 {
            let rec = MatchRecord {
                i: 0,
                j: 1,
                px: x as f64,
                py: y as f64,
                qx: x as f64 + 3.0,
                qy: y as f64,
                conf: if x == 32 { 0.01 } else { 0.9 },
            };
            lines.push_str(&serde_json::to_string(&rec).unwrap());
            lines.push('\n');
        }
    }
    std::fs::write(d.join("dense.jsonl"), lines).unwrap();
    let out = proba(d, &["ingest", "--matches", "dense.jsonl", "--width", "64", "--height", "64"]);
    ok(&out);
    let problem = io::read_scene(&d.join("scene.json")).unwrap();
    // 4×4 grid points, minus the column at x = 32 whose confidence is not above the floor.
    assert_eq!(problem.correspondences.len(), 12);
    assert!(problem.correspondences.iter().all(|c| c.p.x % 16.0 == 0.0 && c.p.x != 32.0));

    let out = proba(d, &["ingest", "--matches", "dense.jsonl", "--width", "64", "--height", "64", "--conf-floor", "0.95"]);
    assert_eq!(out.status.code(), Some(1));
}
