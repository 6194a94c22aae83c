use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sublab(dir: &Path, args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sublab"))
        .current_dir(dir)
        .env("SSL_THREADS", threads)
        .args(args)
        .output()
        .unwrap()
}

fn with_config(json: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), json).unwrap();
    dir
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn scenarios_lists_five() {
    let dir = tempfile::tempdir().unwrap();
    let o = sublab(dir.path(), &["scenarios"], "1");
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 5);
}

#[test]
fn config_errors_exit_two() {
    let dir = with_config(
        r#"{"scenario": {"name": "g_brownian", "params": {"sigma_lo": 1.5, "sigma_hi": 1.0}}}"#,
    );
    assert_eq!(
        code(&sublab(dir.path(), &["check", "--config", "run.json"], "1")),
        2
    );
    let dir = with_config(r#"{"scenario": {"name": "g_brownian"}, "unknown": true}"#);
    assert_eq!(
        code(&sublab(dir.path(), &["solve", "--config", "run.json"], "1")),
        2
    );
    assert_eq!(
        code(&sublab(
            dir.path(),
            &["solve", "--config", "missing.json"],
            "1"
        )),
        2
    );
    assert_eq!(code(&sublab(dir.path(), &["solve"], "1")), 2);
    let dir = with_config(r#"{"scenario": {"name": "g_brownian"}}"#);
    assert_eq!(
        code(&sublab(
            dir.path(),
            &["solve", "--config", "run.json"],
            "zero"
        )),
        2
    );
}

#[test]
fn stencil_failure_exits_one() {
    // a strongly correlated 2-d diffusion on a very anisotropic grid breaks
    // diagonal dominance of the cross stencil
    let dir = with_config(
        r#"{"scenario": {"name": "g_brownian", "params": {"dim": 2, "rho": 0.9}},
            "grid": {"lo": [-4, -4], "hi": [4, 4], "n": [81, 9]}}"#,
    );
    let o = sublab(dir.path(), &["solve", "--config", "run.json"], "1");
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("node"));
}

#[test]
fn check_passes_with_zero_coefficients() {
    let dir = with_config(
        r#"{"scenario": {"name": "g_brownian", "params": {"sigma_lo": 0.0, "sigma_hi": 0.0}}}"#,
    );
    let o = sublab(
        dir.path(),
        &["check", "--config", "run.json", "--quiet"],
        "1",
    );
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/check.json")).unwrap())
            .unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["symbol_decay"]["table"]
        .as_array()
        .unwrap()
        .iter()
        .all(|row| row[1] == 0.0));
}

#[test]
fn solve_reproduces_oracles_and_constants() {
    for (name, psi, tol) in [
        ("g_brownian", r#"{"kind": "square"}"#, 2e-2),
        ("drift_band", r#"{"kind": "tanh"}"#, 2e-2),
        ("poisson_band", r#"{"kind": "one_minus_exp_neg"}"#, 2e-2),
    ] {
        let dir = with_config(&format!(
            r#"{{"scenario": {{"name": "{name}"}}, "psi": {psi}}}"#
        ));
        assert_eq!(
            code(&sublab(dir.path(), &["solve", "--config", "run.json"], "1")),
            0
        );
        let v: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(dir.path().join("out/solve_summary.json")).unwrap(),
        )
        .unwrap();
        let p = &v["values_at_x0"][0];
        let (value, oracle) = (p["value"].as_f64().unwrap(), p["oracle"].as_f64().unwrap());
        assert!((value - oracle).abs() < tol, "{name}: {value} vs {oracle}");
        assert!(v.get("wall_time_s").is_none());
    }
    let dir = with_config(
        r#"{"scenario": {"name": "mixed_jump_diffusion"}, "psi": {"kind": "constant", "value": 0.5}, "output_times": [0.1, 0.2]}"#,
    );
    assert_eq!(
        code(&sublab(dir.path(), &["solve", "--config", "run.json"], "1")),
        0
    );
    let mut rows = csv::Reader::from_path(dir.path().join("out/values.csv")).unwrap();
    let mut n = 0;
    for r in rows.records() {
        assert_eq!(&r.unwrap()[2], "0.5");
        n += 1;
    }
    assert_eq!(n, 2 * 161);
}

#[test]
fn mc_is_byte_identical_and_constant_payoff_exact() {
    let dir = with_config(
        r#"{"scenario": {"name": "drift_band"}, "mc": {"paths": 2000, "policy": {"kind": "best_constant"}, "steps": 20}}"#,
    );
    let a = sublab(
        dir.path(),
        &["mc", "--config", "run.json", "--out", "a", "--seed", "9"],
        "1",
    );
    let b = sublab(
        dir.path(),
        &["mc", "--config", "run.json", "--out", "b", "--seed", "9"],
        "3",
    );
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0);
    for f in ["mc.csv", "mc_summary.json", "mc_excursions.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/mc_summary.json")).unwrap())
            .unwrap();
    assert_eq!(v["best_control"], 2);

    let dir = with_config(
        r#"{"scenario": {"name": "linear_levy"}, "psi": {"kind": "constant", "value": -1.5}, "mc": {"paths": 500}}"#,
    );
    assert_eq!(
        code(&sublab(dir.path(), &["mc", "--config", "run.json"], "1")),
        0
    );
    let mut rows = csv::Reader::from_path(dir.path().join("out/mc.csv")).unwrap();
    let r = rows.records().next().unwrap().unwrap();
    assert_eq!((&r[3], &r[4]), ("-1.5", "0"));
}

#[test]
fn verify_linear_case_passes() {
    let dir = with_config(r#"{"scenario": {"name": "linear_levy"}, "mc": {"paths": 5000}}"#);
    let o = sublab(dir.path(), &["verify", "--config", "run.json"], "2");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/verify.json")).unwrap())
            .unwrap();
    assert_eq!(v["pass"], true);
    // composition with s = 0 is exact
    assert_eq!(v["reports"][0]["metrics"][0]["value"], 0.0);
}
