use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qfunc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfunc")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn estimate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let two = write(dir.path(), "two.txt", "0\n0\n");
    let o = qfunc(&["estimate", &two, "--kernel", "gaussian", "--h", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert!((v["theta_hat"].as_f64().unwrap() - 0.3989423).abs() < 1e-7);
    assert_eq!(v["n"], 2);
    assert_eq!(v["method"], "tn");
    assert_eq!(v["config"]["level"], 0.95);

    let three = write(dir.path(), "three.csv", "x\n0\n\n1\n2\n");
    let v = json_out(&qfunc(&["estimate", &three, "--kernel", "box", "--h", "1"]));
    assert!((v["theta_hat"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-7);
    let ci = v["ci"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() <= ci[1].as_f64().unwrap());

    let v = json_out(&qfunc(&["estimate", &three, "--h", "1", "--estimator", "bickel-ritov"]));
    assert_eq!(v["method"], "bickel_ritov");
}

#[test]
fn estimate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let three = write(dir.path(), "three.txt", "0\n1\n2\n");
    let o = qfunc(&["estimate", &three, "--adaptive", "--mode", "paper"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid infeasible"));

    let one = write(dir.path(), "one.txt", "1.5\n");
    assert_eq!(qfunc(&["estimate", &one, "--h", "1"]).status.code(), Some(4));
    assert_eq!(qfunc(&["estimate", &one, "--adaptive"]).status.code(), Some(4));

    let bad = write(dir.path(), "bad.txt", "1\n2\nthree\n");
    assert_eq!(qfunc(&["estimate", &bad, "--h", "1"]).status.code(), Some(2));
    let two_cols = write(dir.path(), "cols.csv", "a,b\n1,2\n");
    assert_eq!(qfunc(&["estimate", &two_cols, "--h", "1"]).status.code(), Some(2));

    // flag errors
    assert_eq!(qfunc(&["estimate", &three]).status.code(), Some(2));
    assert_eq!(qfunc(&["estimate", &three, "--h", "1", "--adaptive"]).status.code(), Some(2));
    assert_eq!(qfunc(&["estimate", &three, "--h", "-1"]).status.code(), Some(2));
    assert_eq!(qfunc(&["estimate", &three, "--h", "1", "--kernel", "cosine"]).status.code(), Some(2));
    assert_eq!(qfunc(&["estimate", &three, "--h", "1", "--bogus"]).status.code(), Some(2));
    assert_eq!(qfunc(&["estimate", &three, "--h", "1", "--delta", "0.4"]).status.code(), Some(2));
    assert_eq!(qfunc(&["estimate", &three, "--h", "1", "--level", "1.2"]).status.code(), Some(2));
    assert_eq!(qfunc(&["estimate", "/nonexistent/file", "--h", "1"]).status.code(), Some(2));
}

#[test]
fn adaptive_estimate_echoes_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let body: String =
        qfunc_core::Density::laplace(0.0, 1.0).unwrap().draws(4, 0, 400).iter().map(|x| format!("{x}\n")).collect();
    let path = write(dir.path(), "lap.txt", &body);
    let v = json_out(&qfunc(&["estimate", &path, "--adaptive", "--trace"]));
    assert_eq!(v["method"], "adaptive");
    assert_eq!(v["fallback"], false);
    assert_eq!(v["config"]["grid"]["delta"], 0.5);
    assert_eq!(v["config"]["grid"]["rho"], 1.2);
    assert_eq!(v["config"]["grid"]["ell_scale"], 3.0);
    assert_eq!(v["config"]["grid"]["mode"], "practical");
    assert_eq!(v["config"]["grid"]["l_mode"], "estimated");
    assert!(v["L"].as_f64().unwrap() > 0.0);
    assert!(v["trace"]["tests"].as_array().is_some());
    let theta = v["theta_hat"].as_f64().unwrap();
    assert!((theta - 0.25).abs() < 0.05, "{theta}");

    // the echoed config reproduces the result
    let again = json_out(&qfunc(&[
        "estimate",
        &path,
        "--adaptive",
        "--delta",
        "0.5",
        "--rho",
        "1.2",
        "--ell-scale",
        "3",
        "--mode",
        "practical",
    ]));
    assert_eq!(again["theta_hat"], v["theta_hat"]);
}

#[test]
fn grid_command() {
    let o = qfunc(&["grid", "--n", "1000000", "--mode", "paper", "--l-bound", "1", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1);
    let v = json_out(&o);
    assert_eq!(v["size"], 21);
    assert!((v["M"].as_f64().unwrap() - 40.62165).abs() < 1e-4);
    let rows = v["grid"].as_array().unwrap();
    let last = &rows[rows.len() - 1];
    assert!(last["d"].as_f64().unwrap() > 1.0);
    assert!(last["sigma_tilde"].as_f64().unwrap() > 0.0);

    let o = qfunc(&["grid", "--n", "1000", "--delta", "0.1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("n^delta > log n"));

    let o = qfunc(&["grid", "--n", "5000"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("unknown until L is estimated"));
}

#[test]
fn simulate_config_round_trip_and_flag_rules() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a_json = d.join("a.json");
    let a_csv = d.join("a.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_qfunc"))
        .args([
            "simulate",
            "--seed",
            "7",
            "--density",
            "laplace",
            "--n-list",
            "100,200,400",
            "--replicates",
            "5",
            "--quiet",
        ])
        .arg("--json")
        .arg(&a_json)
        .arg("--csv")
        .arg(&a_csv)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&a_json).unwrap()).unwrap();
    let csv = std::fs::read_to_string(&a_csv).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3);

    // the plan embedded in the report drives an identical run
    let plan = d.join("plan.json");
    std::fs::write(&plan, serde_json::to_string(&report["plan"]).unwrap()).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qfunc"))
        .args(["simulate", "--seed", "7", "--quiet", "--config"])
        .arg(&plan)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(o.stdout, std::fs::read(&a_json).unwrap());

    // --seed is mandatory and overrides the config
    assert_eq!(qfunc(&["simulate", "--config", plan.to_str().unwrap()]).status.code(), Some(2));
    let o = qfunc(&["simulate", "--seed", "8", "--quiet", "--config", plan.to_str().unwrap()]);
    assert_ne!(o.stdout, std::fs::read(&a_json).unwrap());
    let v = json_out(&o);
    assert_eq!(v["plan"]["master_seed"], 8);

    assert_eq!(
        qfunc(&["simulate", "--seed", "1", "--config", plan.to_str().unwrap(), "--replicates", "3"]).status.code(),
        Some(2)
    );
    assert_eq!(qfunc(&["simulate", "--seed", "1", "--replicates", "1"]).status.code(), Some(2));
    assert_eq!(qfunc(&["simulate", "--seed", "1", "--n-list", "200,100"]).status.code(), Some(2));
    assert_eq!(qfunc(&["simulate", "--seed", "1", "--delta", "0.3"]).status.code(), Some(2));
    let junk = d.join("junk.json");
    std::fs::write(&junk, "{\"density\": 3}").unwrap();
    assert_eq!(qfunc(&["simulate", "--seed", "1", "--config", junk.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn simulate_reports_infeasible_rows_and_continues() {
    let o = qfunc(&[
        "simulate",
        "--seed",
        "3",
        "--estimator",
        "adaptive",
        "--delta",
        "0.3",
        "--n-list",
        "100,3000",
        "--replicates",
        "3",
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_out(&o);
    assert!(v["rows"][0]["error"].as_str().unwrap().contains("grid infeasible"));
    assert!(v["rows"][1]["stats"].is_object());

    let o = qfunc(&[
        "simulate",
        "--seed",
        "3",
        "--estimator",
        "adaptive",
        "--delta",
        "0.1",
        "--n-list",
        "100",
        "--replicates",
        "3",
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(3));
}
