use std::path::Path;
use std::process::{Command, Output};

fn subpath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subpath"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn gen_then_gram() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "b.jsonl");
    let out = subpath(&["gen", "--scenario", "b", "--seed", "3", "--trees-per-class", "21", "--out", &data]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&data).unwrap().lines().count(), 42);

    let gram = path(dir.path(), "g.csv");
    let out = subpath(&[
        "gram", "--data", &data, "--kernel", "subpath", "--atomic", "chi2", "--gamma", "0.5", "--beta", "0.5",
        "--normalize", "--range", "0,5", "--out", &gram,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let g = subpath_kernel::GramMatrix::load(&gram).unwrap();
    assert_eq!(g.len(), 42);
    assert!(g.is_symmetric());
    for i in 0..42 {
        assert!((g.values[(i, i)] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn generation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.jsonl"), path(dir.path(), "b.jsonl"));
    for p in [&a, &b] {
        let out = subpath(&["gen", "--scenario", "c2", "--ratio", "0.25", "--seed", "9", "--trees-per-class", "21", "--out", p]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn oracle_check_passes() {
    let out = subpath(&["oracle-check", "--max-nodes", "8", "--cases", "30", "--seed", "2"]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["max_relative_error"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn experiment_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "a.jsonl");
    assert_eq!(code(&subpath(&["gen", "--scenario", "a", "--seed", "1", "--trees-per-class", "25", "--out", &data])), 0);
    let report = path(dir.path(), "report.json");
    let out = subpath(&[
        "experiment", "--data", &data, "--methods", "rooted-gaussian,subpath-chi2", "--repetitions", "5",
        "--train-per-class", "10", "--seed", "4", "--gammas", "0,1", "--cs", "1,10", "--betas", "0",
        "--range", "0,5", "--out", &report,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["methods"].as_array().unwrap().len(), 2);
    assert_eq!(json["split_hashes"].as_array().unwrap().len(), 5);
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("method,oa_mean,oa_std,aa_mean,aa_std,kappa_mean,kappa_std"));
}

#[test]
fn curve_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "curve.csv");
    let out = subpath(&[
        "curve", "--scenario", "c2", "--ratios", "0,0.5", "--methods", "subpath-gaussian", "--repetitions", "2",
        "--train-per-class", "10", "--trees-per-class", "21", "--gammas", "0.1", "--cs", "10", "--betas", "0",
        "--out", &csv,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "ratio,method,mean,std");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,subpath-gaussian,"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&subpath(&[])), 1);
    assert_eq!(code(&subpath(&["gen", "--scenario", "a"])), 1);
    assert_eq!(code(&subpath(&["gen", "--scenario", "z", "--out", "/dev/null"])), 1);
    assert_eq!(code(&subpath(&["--help"])), 0);
}

#[test]
fn bad_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "bad.jsonl");
    std::fs::write(&data, "{\"id\": \"t\", \"label\": \"x\", \"nodes\": [}\n").unwrap();
    let out = subpath(&["gram", "--data", &data, "--out", &path(dir.path(), "g.csv")]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let cyclic = path(dir.path(), "cyclic.jsonl");
    std::fs::write(
        &cyclic,
        r#"{"id":"t","label":"x","nodes":[{"id":"a","parent":"b","leaf_values":[1]},{"id":"b","parent":"a","leaf_values":[1]}]}"#,
    )
    .unwrap();
    assert_eq!(code(&subpath(&["gram", "--data", &cyclic, "--out", &path(dir.path(), "g.csv")])), 2);
    assert_eq!(code(&subpath(&["gram", "--data", &path(dir.path(), "missing.jsonl"), "--out", "x"])), 2);
}
