use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const TINY: &str = r#"
eps = 0.2
eps_list = [0.4, 0.3, 0.2]
t0 = 0.2
box_length = 12.8
grid = 32
sigma = 2.0
"#;

fn fput2d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fput2d"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    fs::write(&path, TINY).unwrap();
    path.to_string_lossy().into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn coeffs_prints_carrier_header() {
    let o = fput2d(&["coeffs"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["omega0"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((v["cx"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["gamma_a_im"].as_f64().unwrap() + 0.75).abs() < 1e-12);
    assert_eq!(v["nonresonant"], Value::Bool(true));
}

#[test]
fn coeffs_flags_axis_carrier() {
    let o = fput2d(&["coeffs", "--set", "carrier=[0.5, 0.0]"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["axis_degenerate_l"], Value::Bool(true));
    assert_eq!(v["gamma_b_im"], Value::Null);
}

#[test]
fn zero_frequency_carrier_exits_with_carrier_code() {
    let o = fput2d(&["coeffs", "--set", "carrier=[0, 0]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("zero frequency"));
}

#[test]
fn resonant_carrier_is_refused_before_running() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = fput2d(&[
        "sweep",
        "--set",
        "resonance_margin=10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!out.join("report.json").exists());
}

#[test]
fn config_errors_exit_with_code_one() {
    assert_eq!(fput2d(&["coeffs", "--set", "epss=0.1"]).status.code(), Some(1));
    assert_eq!(fput2d(&["coeffs", "--set", "variant=sideways"]).status.code(), Some(1));
    assert_eq!(fput2d(&["coeffs", "--config", "/nonexistent/x.toml"]).status.code(), Some(1));
    assert_eq!(fput2d(&["bogus"]).status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_fput2d"))
        .arg("coeffs")
        .env("FPUT2D_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_lists_config_keys() {
    let o = fput2d(&["sweep", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for key in fput2d_cli::config::accepted_keys() {
        assert!(text.contains(key), "help lacks {key}");
    }
}

#[test]
fn zero_envelope_simulation_is_exact() {
    let dir = TempDir::new().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("sim");
    let o = Command::new(env!("CARGO_BIN_EXE_fput2d"))
        .args(["simulate", "--config", &cfg, "--set", "envelope=\"zero\"", "--out"])
        .arg(&out)
        .env("FPUT2D_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["max_sup_error"].as_f64(), Some(0.0));
    assert_eq!(json(&out.join("manifest.json"))["threads"].as_u64(), Some(1));
}

#[test]
fn default_simulation_writes_artifacts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim");
    let o = fput2d(&["simulate", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let snaps = fs::read_dir(out.join("snapshots")).unwrap().count();
    assert!(snaps >= 3, "only {snaps} snapshots");
    for f in [
        "summary.json",
        "errors.csv",
        "lattice_diagnostics.csv",
        "envelope_diagnostics.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let manifest = json(&out.join("manifest.json"));
    assert!(manifest["files"].as_array().unwrap().len() >= 7);
    let head = fs::read_to_string(out.join("lattice_diagnostics.csv")).unwrap();
    assert!(head.starts_with("t,energy,compat_defect,max_amp"));
    let lattice = fs::read(out.join("snapshots/lattice_000.bin")).unwrap();
    assert_eq!(&lattice[..7], b"FPUT2D\0");
}

#[test]
fn envelope_blowup_exits_with_solver_code() {
    let dir = TempDir::new().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("sim");
    let o = fput2d(&[
        "simulate",
        "--config",
        &cfg,
        "--set",
        "amplitude=40",
        "--set",
        "blowup_guard=1000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("EnvelopeBlowup"));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn synthetic_sweeps_pass_and_fail_by_order() {
    let dir = TempDir::new().unwrap();
    let good = dir.path().join("good");
    let o = fput2d(&["sweep", "--set", "synthetic_order=2", "--out", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&good.join("report.json"));
    assert_eq!(report["pass"], Value::Bool(true));
    assert!((report["fit"]["order"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert!(good.join("fit.tsv").exists());

    let bad = dir.path().join("bad");
    let o = fput2d(&["sweep", "--set", "synthetic_order=1", "--out", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(json(&bad.join("report.json"))["pass"], Value::Bool(false));
}

#[test]
fn sweep_reruns_are_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = tiny_config(dir.path());
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = fput2d(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(matches!(o.status.code(), Some(0) | Some(4)), "{}", stderr(&o));
        let mut r = json(&out.join("report.json"));
        r.as_object_mut().unwrap().remove("wall_time_s");
        reports.push(r);
        assert_eq!(fs::read_dir(&out).unwrap().count(), 3 + 3);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn residual_reports_orders() {
    let dir = TempDir::new().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("res");
    let o = fput2d(&[
        "residual",
        "--config",
        &cfg,
        "--set",
        "corrections=true",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&out.join("residual.json"));
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert!(v["order_leading"]["order"].is_number());
    assert!(v["order_corrected"]["order"].is_number());
}
