use std::path::Path;
use std::process::{Command, Output};

use wsaa::budget::{allocate, AllocationExtras, AllocationRule};
use wsaa::solve::ConvergenceClass;

fn wsaa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsaa"))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn simulate(dir: &Path, n: usize, seed: u64) -> String {
    let path = dir.join(format!("data_{n}_{seed}.csv"));
    let p = path.to_str().unwrap();
    let out = wsaa(&[
        "simulate",
        "--dgp",
        "newsvendor",
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        p,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    p.to_owned()
}

const MODEL: &str = r#"{"kind":"newsvendor","cu":10,"co":2}"#;

fn problem_args(data: &str) -> Vec<&str> {
    vec![
        "--data", data, "--x0", "1,1", "--model", MODEL, "--lower", "0", "--upper", "200",
    ]
}

#[test]
fn allocate_matches_library() {
    let out = json(&wsaa(&[
        "allocate", "--regime", "linear", "--theta", "0.5", "--gamma", "100000",
    ]));
    let plan = allocate(
        ConvergenceClass::Linear { theta: 0.5 },
        AllocationRule::Optimal,
        100_000,
        0.2,
        2,
        &AllocationExtras::default(),
    )
    .unwrap();
    assert_eq!(out["n"], plan.n);
    assert_eq!(out["m"], plan.m);
    assert!(plan.n * plan.m <= 100_000);
    assert!(plan.m >= 1);
}

#[test]
fn allocate_linear_example() {
    let out = json(&wsaa(&[
        "allocate", "--regime", "linear", "--theta", "0.7975", "--gamma", "100000", "--delta",
        "0.2", "--d-x", "2",
    ]));
    let kappa = 0.6 / (2.0 * (1.0 / 0.7975f64).ln());
    assert!((out["kappa_star"].as_f64().unwrap() - kappa).abs() < 1e-12);
    assert_eq!(out["m"], 15);
    assert_eq!(out["n"], 6666);
    assert_eq!(out["rate_exponent"], -0.3);
}

#[test]
fn allocate_requires_regime_parameters() {
    let out = wsaa(&[
        "allocate",
        "--regime",
        "superlinear",
        "--theta",
        "1",
        "--gamma",
        "1000",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--eta"));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), 50, 3);
    let b = dir.path().join("again.csv");
    let out = wsaa(&[
        "simulate",
        "--dgp",
        "newsvendor",
        "--n",
        "50",
        "--seed",
        "3",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn solve_and_infer_agree() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 400, 5);
    let mut args = vec!["solve"];
    args.extend(problem_args(&data));
    let solved = json(&wsaa(&args));
    let z = solved["z"][0].as_f64().unwrap();
    assert!((0.0..=200.0).contains(&z));
    assert_eq!(solved["iterations"], 0);

    let mut args = vec!["infer"];
    args.extend(problem_args(&data));
    let inferred = json(&wsaa(&args));
    assert_eq!(inferred["z"], solved["z"]);
    let ci = &inferred["interval"];
    let (lo, est, hi) = (
        ci["lower"].as_f64().unwrap(),
        ci["estimate"].as_f64().unwrap(),
        ci["upper"].as_f64().unwrap(),
    );
    assert!(lo < est && est < hi);
    assert!((est - solved["objective"].as_f64().unwrap()).abs() < 1e-9 * est.abs());
}

#[test]
fn budgeted_solve_reports_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 200, 6);
    let mut args = vec!["solve"];
    args.extend(problem_args(&data));
    args.extend([
        "--algorithm",
        r#"{"name":"subgradient","mu0":2}"#,
        "--iters",
        "7",
    ]);
    let out = json(&wsaa(&args));
    assert_eq!(out["iterations"], 7);
}

#[test]
fn cv_reports_a_grid_choice() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 200, 8);
    let mut args = vec!["cv"];
    args.extend(problem_args(&data));
    args.extend(["--grid", "0.5,1,2", "--k", "4", "--seed", "1"]);
    let out = json(&wsaa(&args));
    let best = out["best"]["h0"].as_f64().unwrap();
    assert!([0.5, 1.0, 2.0].contains(&best));
}

fn write_config(dir: &Path, kernel: &str, h0: f64) -> String {
    let text = format!(
        r#"
schema_version = 1
name = "cli"
replications = 6
base_seed = 4
oracle_samples = 20000
[dgp]
kind = "newsvendor"
[model]
kind = "newsvendor"
cu = 10.0
co = 2.0
[bounds]
lower = [0.0]
upper = [200.0]
[kernel]
kind = "{kernel}"
delta = 0.2
h0 = {h0}
[x0]
quantile = 0.25
[mode]
kind = "unconstrained"
n = [100, 300]
"#
    );
    let path = dir.join(format!("{kernel}_{h0}.toml"));
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn experiment_is_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "gaussian", 0.66);
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out_dir = dir.path().join(format!("out{workers}"));
        let out = wsaa(&[
            "experiment",
            "--config",
            &cfg,
            "--out",
            out_dir.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let records = std::fs::read_to_string(out_dir.join("records.csv")).unwrap();
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
                .unwrap();
        assert!(records.starts_with("schema_version,"));
        assert_eq!(summary["schema_version"], 1);
        outputs.push((records, summary));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn bad_config_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "schema_version = 99\n").unwrap();
    let out = wsaa(&[
        "experiment",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = write_config(dir.path(), "gaussian", -1.0);
    let out = wsaa(&[
        "experiment",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degraded_experiment_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "uniform", 1e-4);
    let out_dir = dir.path().join("out");
    let out = wsaa(&[
        "experiment",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["degraded"], true);
}
