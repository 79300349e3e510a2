mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tworeg::covariance::{cv_hac_cov, FoldPlan};
use tworeg::estimators::{ols_fit, ridge_fit};
use tworeg::io::{read_dataset, read_matrix};

fn tworeg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tworeg")).args(args).env_remove("TWOREG_WORKERS").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn dataset(dir: &Path) -> PathBuf {
    let p = dir.join("data.csv");
    common::write_dataset(&p, 240, &[1.0, -1.0, 0.5, 2.0], 0.8, 3);
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_two() {
    for args in [&["simulate", "--replicates", "1"][..], &["simulate", "--bogus", "1"], &["nope"], &[]] {
        let o = tworeg(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error kind="), "{}", stderr(&o));
    }
    let o = tworeg(&["simulate", "--lambda-grid", "-1"]);
    assert!(stderr(&o).contains("kind=invalid_penalty code=2"), "{}", stderr(&o));
    assert_eq!(tworeg(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    for cmd in ["cov", "fit"] {
        let o = tworeg(&[cmd, "--data", s(&missing), "--out", s(dir.path())]);
        assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
        assert!(stderr(&o).contains("kind=file_not_found"), "{}", stderr(&o));
    }
    let o = tworeg(&["realdata", "--prices", s(&missing), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn cov_with_full_prior_weight_writes_the_prior() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let out = dir.path().join("out");
    let o = tworeg(&[
        "cov",
        "--data",
        s(&data),
        "--kappa",
        "1",
        "--mu",
        "0.3",
        "--bootstrap-iterations",
        "200",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let prior = read_matrix(&out.join("prior.txt")).unwrap();
    let shrunk = read_matrix(&out.join("shrunk.txt")).unwrap();
    assert!((&prior - &shrunk).norm() <= 1e-12 * prior.norm());
    let sel: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("selection.json")).unwrap()).unwrap();
    assert_eq!(sel["selected_by"], "fixed");
    for f in ["crude.txt", "normalized.txt", "config.resolved.toml", "audit.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn cov_sandwich_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let out = dir.path().join("out");
    let o = tworeg(&["cov", "--data", s(&data), "--estimator", "hac", "--folds", "8", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (d, _) = read_dataset(&data, "y").unwrap();
    let lib = cv_hac_cov(&d, &FoldPlan::contiguous(d.n(), 8).unwrap()).unwrap();
    let cli = read_matrix(&out.join("crude.txt")).unwrap();
    assert_eq!(&cli, lib.entries());
    let sel: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("selection.json")).unwrap()).unwrap();
    assert_eq!(sel["selected_by"], "cross_validation");
    assert_eq!(sel["scores"].as_array().unwrap().len(), 36);
}

#[test]
fn fit_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let (d, _) = read_dataset(&data, "y").unwrap();
    for (est, lambda, lib) in [("ols", "0", ols_fit(&d).unwrap()), ("ridge", "3.5", ridge_fit(&d, 3.5).unwrap())] {
        let out = dir.path().join(est);
        let o = tworeg(&["fit", "--data", s(&data), "--estimator", est, "--lambda", lambda, "--out", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("coefficients.json")).unwrap()).unwrap();
        let coef: Vec<f64> = v["coefficients"].as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect();
        for (a, b) in coef.iter().zip(lib.values.iter()) {
            assert!((a - b).abs() <= 1e-15 * b.abs(), "{a} vs {b}");
        }
        assert_eq!(v["names"][3], "x4");
    }
    // two-stage fit with an explicit covariance file
    let cov = dir.path().join("cov.txt");
    std::fs::write(&cov, "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n").unwrap();
    let out = dir.path().join("two");
    let o = tworeg(&[
        "fit",
        "--data",
        s(&data),
        "--estimator",
        "tworeg_ridge",
        "--cov",
        s(&cov),
        "--lambda",
        "2",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn simulate_at_zero_penalty_and_config_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = tworeg(&[
        "simulate",
        "--n",
        "300",
        "--replicates",
        "12",
        "--lambda-grid",
        "0",
        "--bootstrap-iterations",
        "100",
        "--out",
        s(&first),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let results = std::fs::read_to_string(first.join("results.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(results.as_bytes());
    let errors: Vec<f64> = rdr.records().map(|r| r.unwrap()[4].parse().unwrap()).collect();
    // at lambda = 0 every arm is OLS
    assert!(errors.iter().all(|e| (e - errors[0]).abs() <= 1e-10 * errors[0]), "{errors:?}");

    let resolved = std::fs::read_to_string(first.join("config.resolved.toml")).unwrap();
    assert!(resolved.contains("sigma2 = \"10\""), "{resolved}");
    let second = dir.path().join("second");
    let o = tworeg(&["simulate", "--config", s(&first.join("config.resolved.toml")), "--out", s(&second)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(results, std::fs::read_to_string(second.join("results.csv")).unwrap());
}
