use std::fs;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn dqczne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqczne")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn gen_prints_json_and_qasm() {
    let v: Value = serde_json::from_str(&stdout(&dqczne(&["gen", "--alg", "ghz", "--n", "4"]))).unwrap();
    assert_eq!(v["num_qubits"], 4);
    assert_eq!(v["gates"].as_array().unwrap().len(), 4);
    assert_eq!(v["depth"], 4);

    let qasm = stdout(&dqczne(&["gen", "--alg", "ghz", "--n", "2", "--qasm"]));
    assert!(qasm.starts_with("OPENQASM 2.0;"));
    assert_eq!(qasm.lines().filter(|l| l.starts_with("h ")).count(), 1);
    assert_eq!(qasm.lines().filter(|l| l.starts_with("cx ")).count(), 1);
}

#[test]
fn partition_reads_qasm() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("ghz.qasm");
    fs::write(&path, stdout(&dqczne(&["gen", "--alg", "ghz", "--n", "4", "--qasm"]))).unwrap();
    let out = stdout(&dqczne(&["partition", "--qasm", path.to_str().unwrap(), "-k", "2"]));
    assert_eq!(out.lines().count(), 1);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["k"], 2);
    assert_eq!(v["part_of"], serde_json::json!([0, 0, 1, 1]));
    assert_eq!(v["cut_count"], 1);

    let lowered = stdout(&dqczne(&["lower", "--qasm", path.to_str().unwrap(), "-k", "2"]));
    assert!(lowered.contains("reset"));
}

#[test]
fn bad_qasm_reports_diagnostics() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("bad.qasm");
    fs::write(&path, "OPENQASM 2.0;\nqreg q[2];\nfoo q[0];\n").unwrap();
    let o = dqczne(&["partition", "--qasm", path.to_str().unwrap(), "-k", "2"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.qasm:3:"), "{err}");
}

#[test]
fn run_sweep_and_summarize() {
    let dir = tempdir().unwrap();
    let single = dir.path().join("one.toml");
    fs::write(
        &single,
        "algorithm = \"w\"\nn = 4\nk = 2\np_local = 0.02\nstrategy = \"local\"\n",
    )
    .unwrap();
    let v: Value = serde_json::from_str(&stdout(&dqczne(&["run", "--config", single.to_str().unwrap()]))).unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["strategy"], "local");
    assert!(v["E_baseline"].as_f64().unwrap() > 0.0);

    let grid = dir.path().join("grid.toml");
    fs::write(
        &grid,
        "algorithm = [\"ghz\", \"dj\"]\nn = [4, 8]\nk = 4\nstrategy = [\"global\", \"local\"]\n",
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let o = dqczne(&[
        "sweep",
        "--config",
        grid.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    stdout(&o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("8 points, 4 skipped for capacity"));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 9);
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(&header[..4], ["algorithm", "n", "k", "p_local"]);
    assert!(header.contains(&"E_baseline") && header.contains(&"excluded_flag"));
    let status = header.iter().position(|&h| h == "status").unwrap();
    let skipped = text
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(status) == Some("skipped_capacity"))
        .count();
    assert_eq!(skipped, 4);

    let summary = stdout(&dqczne(&[
        "summarize",
        "--in",
        csv.to_str().unwrap(),
        "--group-by",
        "algorithm,strategy",
        "--trim",
        "0",
    ]));
    let mut lines = summary.lines();
    assert!(lines.next().unwrap().starts_with("algorithm,strategy,"));
    // four groups, two metrics each
    assert_eq!(lines.count(), 8);

    // a run config must describe exactly one point
    let o = dqczne(&["run", "--config", grid.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "algorithm = \"ghz\"\nlambda = 3\n").unwrap();
    let o = dqczne(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda"));
}
