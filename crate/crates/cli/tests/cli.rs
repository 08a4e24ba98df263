use std::path::Path;
use std::process::{Command, Output};

fn jj(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jj"))
        .current_dir(dir)
        .env_remove("JJ_THREADS")
        .args(args)
        .output()
        .expect("run jj")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const MINIMAL: &str =
    r#"{"poly": {"type": "quadratic", "rho": 12}, "branch": "-", "steps": 8, "window": 1024}"#;

#[test]
fn minimal_config_passes() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "run.json", MINIMAL);
    let o = jj(d.path(), &["iterate", "--config", &cfg, "--out", "a"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["coefficients.csv", "trace.json", "report.json"] {
        assert!(d.path().join("a").join(f).exists(), "{f}");
    }
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("a/report.json")).unwrap()).unwrap();
    assert_eq!(rep["pass"], true);
    assert_eq!(rep["config_hash"].as_str().unwrap().len(), 64);
    for (_, c) in rep["checks"].as_object().unwrap() {
        assert!(c["tolerance"].is_number() && c["value"].is_number());
    }
}

#[test]
fn reports_are_bit_identical() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "run.json", MINIMAL);
    assert_eq!(code(&jj(d.path(), &["iterate", "--config", &cfg, "--out", "a"])), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_jj"))
        .current_dir(d.path())
        .env("JJ_THREADS", "1")
        .args(["iterate", "--config", &cfg, "--out", "b"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    for f in ["report.json", "trace.json", "coefficients.csv"] {
        let a = std::fs::read(d.path().join("a").join(f)).unwrap();
        let b = std::fs::read(d.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn wrong_branch_length_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let o = jj(d.path(), &["renorm", "--branch=-+"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("length 2"));
    let o = jj(d.path(), &["renorm", "--branch=x"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn tight_tolerances() {
    let d = tempfile::tempdir().unwrap();
    // below 100·eps in the configuration is rejected outright
    let cfg = write(d.path(), "tight.json", r#"{"tolerances": {"renorm_equation": 1e-16}}"#);
    assert_eq!(code(&jj(d.path(), &["renorm", "--config", &cfg])), 2);
    // scaling to 1e−16 runs and fails honestly
    let o = jj(d.path(), &["renorm", "--tol-scale", "1e-9"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("renorm_equation"));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(rep["pass"], false);
}

#[test]
fn schema_errors() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "bad.json", r#"{"stepz": 3}"#);
    assert_eq!(code(&jj(d.path(), &["iterate", "--config", &cfg])), 2);
    let cfg = write(d.path(), "bad2.json", r#"{"tolerances": {"nonsense": 1.0}}"#);
    assert_eq!(code(&jj(d.path(), &["iterate", "--config", &cfg])), 2);
    assert_eq!(code(&jj(d.path(), &["iterate", "--threads", "zero"])), 2);
    assert_eq!(code(&jj(d.path(), &["iterate", "--tol-scale", "-1"])), 2);
}

#[test]
fn renorm_outputs_lf_csv() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&jj(d.path(), &["renorm", "--out", "r"])), 0);
    let csv = std::fs::read_to_string(d.path().join("r/coefficients.csv")).unwrap();
    assert!(csv.starts_with("index,p,q\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn oracle_against_iterate() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&jj(d.path(), &["iterate", "--steps", "10", "--out", "it"])), 0);
    let o = jj(d.path(), &["oracle", "--compare", "it/trace.json", "--ruelle", "--out", "or"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["measure.csv", "coeffs.csv", "comparison.json", "report.json"] {
        assert!(d.path().join("or").join(f).exists(), "{f}");
    }
    let cmp: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("or/comparison.json")).unwrap()).unwrap();
    assert!(cmp["balanced_deviation"].as_f64().unwrap() <= 1e-5);
    assert!(cmp["rho_ruelle"].as_f64().unwrap() > 0.0);
}

#[test]
fn darboux_needs_rng_seed() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&jj(d.path(), &["darboux"])), 2);
    let o = jj(d.path(), &["darboux", "--seed", "9", "--sweep", "12,20", "--pairs", "3", "--out", "db"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.path().join("db/phi.csv").exists());
    assert!(d.path().join("db/darboux_report.json").exists());
}

#[test]
fn diagnose_summaries() {
    let d = tempfile::tempdir().unwrap();
    let out = |args: &[&str]| {
        let o = jj(d.path(), args);
        assert_eq!(code(&o), 0);
        String::from_utf8(o.stdout).unwrap()
    };
    let s = out(&["diagnose"]);
    assert!(s.contains("gap 10, sufficiently hyperbolic at A=10: yes, ϰ ≤ 0.12"), "{s}");
    let s = out(&["diagnose", "--poly", "quadratic:3"]);
    assert!(s.contains("sufficiently hyperbolic at A=10: no"), "{s}");
    assert!(s.contains("measurement mode"));
    let s = out(&["diagnose", "--poly", "chebyshev:3:0.05"]);
    assert!(s.contains("critical values 8000, -8000"), "{s}");
}

#[test]
fn weak_polynomial_iterates_only_with_force() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&jj(d.path(), &["iterate", "--poly", "quadratic:3", "--steps", "2"])), 1);
}
