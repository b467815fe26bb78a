use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_stirap");

fn stirap(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("SOURCE_DATE_EPOCH", "1700000000").output().expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run_to_file(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = stirap(&args);
    assert!(o.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap()
}

fn stderr_error(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().next().expect("error line on stderr");
    serde_json::from_str::<Value>(line).unwrap()["error"].clone()
}

const TOY: &str = r#"{"system": {"preset": "toy"}}"#;
const CS_XZ: &str = r#"{"system": {"preset": "cesium", "excited_f": 4, "pol_3": "x", "pol_4": "z"}}"#;

#[test]
fn toy_decompose_dimensions() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "toy.json", TOY);
    let r = run_to_file("decompose", &cfg, &dir.path().join("r.json"), &[]);
    let d = &r["results"]["dimensions"];
    let row = |m: &str| (d[m]["lambda"].as_u64(), d[m]["dark"].as_u64(), d[m]["prime"].as_u64());
    assert_eq!(row("a"), (Some(2), Some(1), Some(0)));
    assert_eq!(row("b"), (Some(2), Some(0), Some(1)));
    assert_eq!(r["header"]["command"], "decompose");
}

#[test]
fn cesium_lambda_list() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "cs.json", CS_XZ);
    let r = run_to_file("transfer", &cfg, &dir.path().join("r.json"), &[]);
    let mut got: Vec<f64> =
        r["results"]["lambda_pairs"]["lambdas"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    got.sort_by(f64::total_cmp);
    let mut want: Vec<f64> = [25.0_f64 / 49.0, 25.0 / 49.0, 200.0 / 147.0, 200.0 / 147.0, 250.0 / 49.0, 375.0 / 392.0]
        .iter()
        .map(|x| x.sqrt())
        .collect();
    want.sort_by(f64::total_cmp);
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-9, "{g} vs {w}");
    }
    assert!(r["results"]["transfer"]["unitarity_error"].as_f64().unwrap() < 1e-8);
}

#[test]
fn missing_polarization_names_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.json", r#"{"system": {"preset": "cesium", "excited_f": 4, "pol_3": "x"}}"#);
    let o = stirap(&["transfer", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_error(&o);
    assert_eq!(e["kind"], "validation");
    assert_eq!(e["field"], "system.pol_4");
    assert!(o.stdout.is_empty());
}

#[test]
fn parse_error_has_line_and_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.json", "{\n  \"system\": {\"preset\": \"toy\"},\n  \"rtol\": \"small\"\n}");
    let o = stirap(&["transfer", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_error(&o);
    assert_eq!(e["kind"], "parse");
    assert_eq!(e["field"], "rtol");
    assert_eq!(e["line"], 3);
}

#[test]
fn unknown_keys_and_bad_ranges_are_config_errors() {
    let dir = TempDir::new().unwrap();
    for (body, field) in [
        (r#"{"system": {"preset": "toy"}, "omega": 3}"#, None),
        (r#"{"system": {"preset": "toy"}, "rank_tol": 0.5}"#, Some("rank_tol")),
        (r#"{"system": {"preset": "toy", "pol_3": "x"}}"#, None),
    ] {
        let cfg = write_config(&dir, "c.json", body);
        let o = stirap(&["decompose", "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        if let Some(f) = field {
            assert_eq!(stderr_error(&o)["field"], f);
        }
    }
    let o = stirap(&["decompose", "--config", "/nonexistent/x.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_error(&o)["kind"], "io");
}

#[test]
fn numeric_failure_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "toy.json", TOY);
    let o = stirap(&["transfer", "--config", cfg.to_str().unwrap(), "--rtol", "1e-300", "--atol", "1e-300"]);
    assert_eq!(o.status.code(), Some(3));
    let e = stderr_error(&o);
    assert_eq!(e["kind"], "numeric");
    assert_eq!(e["module"], "passage");
}

#[test]
fn bad_basis_override_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", r#"{"system": {"preset": "toy"}, "a_basis": [[1, 0, 0], [1, 0, 0]]}"#);
    let o = stirap(&["transfer", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_error(&o)["field"], "a_basis");
}

#[test]
fn reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "toy.json", TOY);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    run_to_file("transfer", &cfg, &a, &[]);
    run_to_file("transfer", &cfg, &b, &[]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(serde_json::from_slice::<Value>(&fs::read(&a).unwrap()).unwrap()["header"]["timestamp"], 1700000000);
}

#[test]
fn echoed_config_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "cs.json", CS_XZ);
    let first = run_to_file("decompose", &cfg, &dir.path().join("r1.json"), &["--rank-tol", "1e-9"]);
    let echoed = first["header"]["config"].clone();
    assert_eq!(echoed["rank_tol"], 1e-9);
    let cfg2 = write_config(&dir, "echo.json", &serde_json::to_string(&echoed).unwrap());
    let second = run_to_file("decompose", &cfg2, &dir.path().join("r2.json"), &[]);
    assert_eq!(first["header"]["config"], second["header"]["config"]);
    assert_eq!(first["header"]["config_hash"], second["header"]["config_hash"]);
    assert_eq!(first["results"], second["results"]);
}

fn compare(a: &Path, b: &Path, tol: &str) -> (Option<i32>, Value) {
    let o = stirap(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--tol", tol]);
    let v = serde_json::from_slice(&o.stdout).unwrap_or(Value::Null);
    (o.status.code(), v)
}

#[test]
fn compare_identical_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "toy.json", TOY);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    run_to_file("decompose", &cfg, &a, &[]);
    run_to_file("decompose", &cfg, &b, &[]);
    let (code, diff) = compare(&a, &b, "0");
    assert_eq!(code, Some(0));
    assert_eq!(diff["sections"], serde_json::json!({}));
    assert_eq!(diff["max_deviation"], 0.0);
}

#[test]
fn compare_tolerance_study() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "toy.json", TOY);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    run_to_file("transfer", &cfg, &a, &["--rtol", "1e-8", "--atol", "1e-8"]);
    run_to_file("transfer", &cfg, &b, &[]);
    let (code, diff) = compare(&a, &b, "1e-6");
    assert_eq!(code, Some(0), "{diff}");
    assert!(diff["max_deviation"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn compare_analytic_against_ode() {
    let dir = TempDir::new().unwrap();
    let ode = write_config(&dir, "ode.json", TOY);
    let analytic = write_config(&dir, "an.json", r#"{"system": {"preset": "toy"}, "transfer_method": "analytic"}"#);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let ra = run_to_file("transfer", &ode, &a, &[]);
    let rb = run_to_file("transfer", &analytic, &b, &[]);
    assert_eq!(rb["run"]["method"], "analytic");
    assert_eq!(ra["run"]["method"], "ode");
    let (code, diff) = compare(&a, &b, "1e-6");
    assert_eq!(code, Some(0), "{diff}");
}

#[test]
fn compare_reports_differences_and_shape_mismatch() {
    let dir = TempDir::new().unwrap();
    let toy = write_config(&dir, "toy.json", TOY);
    let cs = write_config(&dir, "cs.json", CS_XZ);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    run_to_file("decompose", &toy, &a, &[]);
    run_to_file("decompose", &cs, &b, &[]);
    run_to_file("transfer", &toy, &c, &[]);
    let (code, _) = compare(&a, &b, "1e-6");
    assert_eq!(code, Some(2));
    let (code, _) = compare(&a, &c, "1e-6");
    assert_eq!(code, Some(2));

    let mut r: Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    r["results"]["lambda_pairs"]["lambdas"][0] = serde_json::json!(2.0);
    fs::write(&b, serde_json::to_string(&r).unwrap()).unwrap();
    let (code, diff) = compare(&a, &b, "1e-6");
    assert_eq!(code, Some(1));
    assert!(diff["sections"]["lambda_pairs"].as_f64().unwrap() > 0.5);
}

#[test]
fn batch_writes_isolated_outputs() {
    let dir = TempDir::new().unwrap();
    let toy = write_config(&dir, "toy.json", TOY);
    let cs = write_config(&dir, "cs.json", CS_XZ);
    let bad = write_config(&dir, "bad.json", r#"{"system": {"preset": "cesium"}}"#);
    let out = dir.path().join("out");
    let o = Command::new(BIN)
        .args(["decompose", "--config", toy.to_str().unwrap(), "--config", cs.to_str().unwrap()])
        .args(["--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("STIRAP_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(out.join("toy.json").exists() && out.join("cs.json").exists());
    assert!(!out.join("bad.json").exists());
    let e = stderr_error(&o);
    assert!(e["path"].as_str().unwrap().ends_with("bad.json"));

    let o = Command::new(BIN)
        .args(["decompose", "--config", toy.to_str().unwrap(), "--config", cs.to_str().unwrap()])
        .env("STIRAP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_and_trajectory_reports() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "toy.json", r#"{"system": {"preset": "toy"}, "omega_t": 2000}"#);
    let r = run_to_file("verify", &cfg, &dir.path().join("v.json"), &[]);
    let v = &r["results"];
    assert!(v["pair_residual"].as_f64().unwrap() < 1e-9);
    for x in v["darkness"]["lambda_pairs"].as_array().unwrap() {
        assert!(x.as_f64().unwrap() < 1e-9);
    }
    let runs = v["oracle"].as_array().unwrap();
    assert_eq!(runs.len(), 4);
    for run in runs {
        match run["fidelity"].as_f64() {
            Some(f) => assert!(f > 0.999, "{run}"),
            None => assert_eq!(run["state"], "b_prime[0]"),
        }
    }

    let r = run_to_file("trajectory", &cfg, &dir.path().join("t.json"), &[]);
    let pts = r["results"]["points"].as_array().unwrap();
    assert_eq!(pts.len(), 21);
    for p in pts {
        assert!((p["norm"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    }
    let last = &pts[20]["populations_b"];
    let total: f64 = last.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-8);
}

#[test]
fn convergence_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "toy.json", r#"{"system": {"preset": "toy"}, "omega_t_list": [250, 500, 1000]}"#);
    let r = run_to_file("convergence", &cfg, &dir.path().join("c.json"), &["--profile", "sine2"]);
    let res = &r["results"];
    assert_eq!(res["points"].as_array().unwrap().len(), 3);
    assert_eq!(res["monotone"], true);
    assert!(res["decay_exponent"].as_f64().unwrap() < -1.0);
}

#[test]
fn usage_errors_exit_two() {
    let o = stirap(&["transfer"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_error(&o)["kind"], "usage");
    let o = stirap(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}
