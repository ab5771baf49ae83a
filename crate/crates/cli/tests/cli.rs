use std::path::Path;
use std::process::{Command, Output};

use pxlap_cli::config::reference_page;
use pxlap_cli::fieldio::{load_field, write_field};

const SMALL: [&str; 4] = ["--set", "grid.nodes=[12,12]", "--set", "solver.multistart=3"];

fn pxlap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pxlap")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn out_dir(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn validate_model_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pxlap(&["validate", "-o", &out_dir(tmp.path(), "v")]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("theta = 4.13"));
    assert!(tmp.path().join("v/validate.json").exists());
}

#[test]
fn shipped_config_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/model.toml");
    let o = pxlap(&["validate", "-c", cfg, "-o", &out_dir(tmp.path(), "v")]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn critical_q_is_an_exponent_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pxlap(&["validate", "-o", &out_dir(tmp.path(), "v"), "--set", "exponents.p=1.5", "--set", "exponents.q=6.0"]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("[FAIL] supercriticality q > p*"));
}

#[test]
fn zero_nonlinearity_has_no_positive_primitive() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pxlap(&["validate", "-o", &out_dir(tmp.path(), "v"), "--set", "nonlinearity.kind=\"zero\""]);
    assert_eq!(code(&o), 5);
    assert!(stdout(&o).contains("[FAIL] positive primitive"));
}

#[test]
fn linear_nonlinearity_fails_decay_at_infinity() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pxlap(&["validate", "-o", &out_dir(tmp.path(), "v"), "--set", "nonlinearity.kind=\"linear\""]);
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("[FAIL] f/|s|^(p-1) -> 0 as |s| -> inf"));
}

#[test]
fn lambda_below_lower_end_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pxlap(&["solve", "-o", &out_dir(tmp.path(), "s"), "--set", "lambda.value=1.0"]);
    assert_eq!(code(&o), 5);
    let o = pxlap(&["validate", "-o", &out_dir(tmp.path(), "v"), "--set", "lambda.interval=[10.0, 30.0]"]);
    assert_eq!(code(&o), 5);
}

#[test]
fn usage_and_io_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pxlap(&["validate", "-o", &out_dir(tmp.path(), "v"), "--set", "grid.spacing=2"]);
    assert_eq!(code(&o), 2);
    let o = pxlap(&["validate", "-c", &out_dir(tmp.path(), "missing.toml")]);
    assert_eq!(code(&o), 9);
    let o = pxlap(&["certify", "--field", &out_dir(tmp.path(), "missing.csv"), "--k", "3"]);
    assert_eq!(code(&o), 9);
    let o = pxlap(&["recursion", "--c", "1", "--b", "0.5", "--eta", "1", "--a0", "0.1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn recursion_prints_the_sequence() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(tmp.path(), "r");
    let o = pxlap(&["recursion", "--c", "1", "--b", "2", "--eta", "1", "--a0", "0.5", "--n", "10", "--json", "-o", &dir]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let seq = v["sequence"].as_array().unwrap();
    assert_eq!(seq.len(), 11);
    assert!((seq[10].as_f64().unwrap() - 0.5 * 2f64.powi(-10)).abs() <= 1e-15);
    assert!(v["converged"].as_bool() == Some(false));
    let o = pxlap(&["recursion", "--c", "1", "--b", "2", "--eta", "1", "--a0", "0", "--n", "10", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["sequence"].as_array().unwrap().iter().all(|a| a.as_f64() == Some(0.0)));
    assert!(tmp.path().join("r/recursion.csv").exists());
}

#[test]
fn solve_is_deterministic_and_fields_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let a = out_dir(tmp.path(), "a");
    let b = out_dir(tmp.path(), "b");
    let mut args = vec!["solve", "-o", &a];
    args.extend(SMALL);
    let o = pxlap(&args);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    args[2] = &b;
    assert_eq!(code(&pxlap(&args)), 0);
    for f in ["report.json", "report.txt", "u0.csv", "u1.csv", "u2.csv", "u1_trace.csv", "u1_a_pos.csv"] {
        let x = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let y = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    for f in ["u0.csv", "u1.csv", "u2.csv"] {
        let path = tmp.path().join("a").join(f);
        let bytes = std::fs::read(&path).unwrap();
        let field = load_field(&path).unwrap();
        let mut again = Vec::new();
        write_field(&mut again, &field).unwrap();
        assert_eq!(bytes, again, "{f} does not round-trip");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("a/report.json")).unwrap()).unwrap();
    assert_eq!(report["solution"]["found_count"], 3);
    assert_eq!(report["all_certified"], true);
    let k = report["k_certified"].as_f64().unwrap();
    let lambda = report["lambda"].as_f64().unwrap();
    let mu = report["mu"].as_f64().unwrap();

    // re-certify the stored minimizer at the certified K, then at a K below its sup
    let field = out_dir(tmp.path(), "a/u1.csv");
    let (ks, ls, ms) = (k.to_string(), lambda.to_string(), mu.to_string());
    let c = out_dir(tmp.path(), "c");
    let o = pxlap(&["certify", "--field", &field, "--k", &ks, "--lambda", &ls, "--mu", &ms, "-o", &c]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = pxlap(&["certify", "--field", &field, "--k", "2", "--lambda", &ls, "-o", &c]);
    assert_eq!(code(&o), 7, "{}", stdout(&o));
}

#[test]
fn single_cell_sweep_matches_solve() {
    let tmp = tempfile::tempdir().unwrap();
    let s = out_dir(tmp.path(), "s");
    let w = out_dir(tmp.path(), "w");
    let mut args = vec!["solve", "-o", &s];
    args.extend(SMALL);
    assert_eq!(code(&pxlap(&args)), 0);
    let mut args = vec!["sweep", "-o", &w, "--set", "lambda.sweep_factors=[2.0]", "--set", "mu.sweep_fractions=[1.0]"];
    args.extend(SMALL);
    let o = pxlap(&args);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    for f in ["u0.csv", "u1.csv", "u2.csv"] {
        let x = std::fs::read(tmp.path().join("s").join(f)).unwrap();
        let y = std::fs::read(tmp.path().join("w/cell-000").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between solve and sweep");
    }
    let csv = std::fs::read_to_string(tmp.path().join("w/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().next().unwrap().starts_with("cell,lambda,lambda_factor,mu_fraction,mu,found_count"));
}

#[test]
fn sweep_below_lower_end_finds_only_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let w = out_dir(tmp.path(), "w");
    let mut args = vec!["sweep", "-o", &w, "--set", "lambda.sweep_factors=[0.5]", "--set", "mu.sweep_fractions=[0.0]", "--json"];
    args.extend(SMALL);
    let o = pxlap(&args);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["found_count"], 1);
}

#[test]
fn defaults_reference_is_current() {
    let o = pxlap(&["defaults", "--reference"]);
    assert_eq!(code(&o), 0);
    let page = stdout(&o);
    assert_eq!(page, reference_page());
    let doc = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/config-reference.md")).unwrap();
    assert_eq!(doc, page, "regenerate docs/config-reference.md with `pxlap defaults --reference`");
    let toml = stdout(&pxlap(&["defaults"]));
    assert!(pxlap_cli::config::RunConfig::from_toml(&toml).is_ok());
}
