use std::path::Path;
use std::process::{Command, Output};

fn cosmowave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cosmowave")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const DS: &str = r#"
[problem]
n = 1
p = 2
epsilon = 0.01

[coefficients]
family = "de_sitter"
H = 1.0
n = 3
"#;

const ADS: &str = r#"
[problem]
n = 1
p = 2

[coefficients]
family = "anti_de_sitter"
H = 1.0
n = 1

[grid]
dx = 0.03125

[stop]
t_max = 8.0

[sweep]
epsilons = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
engine = "ode"
"#;

#[test]
fn classify_de_sitter_is_global() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ds.toml", DS);
    let o = cosmowave(&["classify", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "global_existence");
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &DS.replace("p = 2", "p = 0.5"));
    let o = cosmowave(&["classify", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("problem.p must exceed 1"));

    let cfg = write(dir.path(), "typo.toml", &format!("{DS}\n[grid]\ndxx = 0.1\n"));
    let o = cosmowave(&["classify", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 13"));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&cosmowave(&["frobnicate"])), 64);
    assert_eq!(code(&cosmowave(&["sweep", "--config", "x.toml", "--engine", "spectral"])), 64);
    assert_eq!(code(&cosmowave(&["--help"])), 0);
}

#[test]
fn ode_sweep_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ads.toml", ADS);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let o = cosmowave(&["sweep", "--config", &cfg, "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("epsilon,T,engine,quality,censored\n"));
    assert_eq!(csv.lines().count(), 7);
    assert_eq!(std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap(), csv);

    let o = cosmowave(&["classify", "--config", &cfg, "--out", out, "--quiet"]);
    assert_eq!(code(&o), 0);
    let sweep = format!("{out}/sweep.csv");
    let report = format!("{out}/report.json");
    let o = cosmowave(&["compare", "--sweep", &sweep, "--report", &report, "--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    // A sweep that does not follow the law fails the comparison.
    let flat = "epsilon,T,engine,quality,censored\n0.1,5,ode,1,false\n0.01,5.1,ode,1,false\n0.001,5.2,ode,1,false\n0.0001,5.3,ode,1,false\n";
    let bad = write(dir.path(), "flat.csv", flat);
    let o = cosmowave(&["compare", "--sweep", &bad, "--report", &report]);
    assert_eq!(code(&o), 3);

    // The report describes a different problem.
    let other = write(dir.path(), "other.toml", &ADS.replace("p = 2", "p = 3"));
    let o = cosmowave(&["compare", "--sweep", &sweep, "--report", &report, "--config", &other]);
    assert_eq!(code(&o), 1);
}

#[test]
fn simulate_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ads.toml", ADS);
    let out = dir.path().join("sim");
    let o = cosmowave(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["outcome"]["kind"], "blow_up");
    assert!(summary["T_est"].as_f64().unwrap() > 0.0);
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,E0,E1,W,support_radius,max_abs_v,dt\n"));
    assert!(out.join("trace.dat").exists());
}

#[test]
fn oracle_rejects_damping_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ds.toml", DS);
    let o = cosmowave(&["oracle", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn oracle_writes_its_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ads.toml", ADS);
    let o = cosmowave(&["oracle", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["blowup_time"].as_f64().unwrap() > 8.0);
    assert!(std::fs::read_to_string(dir.path().join("oracle.csv")).unwrap().starts_with("t,W\n"));
}

#[test]
fn selftest_passes() {
    let o = cosmowave(&["selftest"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
