use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fdlab_cli::scenario;

const SMALL_2D: &str = r#"
name = "small"
m = 0.6

[grid]
lo = [0.0, 0.0]
hi = [1.0, 1.0]
cells = [12, 12]

[drift]
preset = "DRIFT"

[initial]
preset = "two-block"
low = 0.5
high = 1.5

[schedule]
horizon = 0.04
substeps = 8
dt = 0.0025
"#;

const SMALL_FLUID: &str = r#"
name = "small-fluid"
m = 0.75
epsilon = 1e-10

[grid]
lo = [0.0, 0.0]
hi = [1.0, 1.0]
cells = [16, 16]

[drift]
preset = "zero"

[initial]
preset = "layered"
low = 0.2
high = 1.0
thickness = 0.1
perturbation = 0.05

[schedule]
horizon = 0.1
substeps = 1
dt = 0.01

[boussinesq]
steps = 10
dt = 0.01
output_every = 5
"#;

fn fdlab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fdlab"));
    cmd.args(args).env_remove("FDLAB_WORKERS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn small(dir: &Path, drift: &str) -> PathBuf {
    write_scenario(dir, &format!("{drift}.toml"), &SMALL_2D.replace("DRIFT", drift))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn run_small(tmp: &Path, drift: &str) -> PathBuf {
    let out = tmp.join(format!("run-{drift}"));
    let o = fdlab(&["run", s(&small(tmp, drift)), "--out", s(&out)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn missing_exponent_is_a_validation_error_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL_2D.replace("DRIFT", "zero").replace("m = 0.6\n", "");
    let p = write_scenario(tmp.path(), "no-m.toml", &body);
    let o = fdlab(&["run", s(&p)], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("`m`"), "{}", stderr(&o));
}

#[test]
fn run_writes_manifest_and_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_small(tmp.path(), "rotation");
    assert!(out.join("manifest.json").is_file());
    let snaps = fs::read_dir(&out).unwrap().filter_map(|e| e.ok()).filter(|e| e.file_name().to_string_lossy().starts_with("snapshot")).count();
    assert!(snaps >= 8, "{snaps} snapshot files");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest.get("format_version").is_some());
}

#[test]
fn divergence_free_battery_refuses_a_compressible_drift() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_small(tmp.path(), "expansion");
    let o = fdlab(&["verify", "energy-divfree", s(&out)], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("not divergence-free"), "{}", stderr(&o));
}

#[test]
fn homogeneous_battery_passes_and_writes_its_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_small(tmp.path(), "zero");
    let o = fdlab(&["verify", "lemma-A1", s(&out)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verify_lemma-A1.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(true));
    let stdout: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stdout, report);
}

#[test]
fn unknown_battery_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fdlab(&["verify", "no-such-battery", s(tmp.path())], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown battery"), "{}", stderr(&o));
}

#[test]
fn worker_count_must_be_positive() {
    let tmp = tempfile::tempdir().unwrap();
    let p = small(tmp.path(), "zero");
    for bad in ["0", "many"] {
        let o = fdlab(&["run", s(&p), "--out", s(&tmp.path().join("w"))], &[("FDLAB_WORKERS", bad)]);
        assert_eq!(code(&o), 2, "FDLAB_WORKERS={bad}");
        assert!(stderr(&o).contains("FDLAB_WORKERS"));
    }
    let o = fdlab(&["run", s(&p), "--out", s(&tmp.path().join("w"))], &[("FDLAB_WORKERS", "1")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn converge_writes_the_study_table() {
    let tmp = tempfile::tempdir().unwrap();
    let p = small(tmp.path(), "rotation");
    let out = tmp.path().join("conv");
    let o = fdlab(&["converge", s(&p), "--n", "2,4", "--out", s(&out)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,l1_error,w2_error,l1_ratio"));
    assert_eq!(lines.count(), 2);
    assert!(out.join("convergence.json").is_file());
}

#[test]
fn distances_writes_pairs_and_fits() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_small(tmp.path(), "rotation");
    let o = fdlab(&["distances", s(&out), "--terms", "8", "--exponents", "2,inf,inf"], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("distances.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("s,t,W2,delta"));
    // 9 snapshots give 36 unordered pairs.
    assert_eq!(csv.lines().count(), 1 + 36);
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("distances_fit.json")).unwrap()).unwrap();
    assert_eq!(fit["delta_exponent"].as_f64(), Some(0.5));
}

#[test]
fn classify_drift_prints_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let p = small(tmp.path(), "rotation");
    let o = fdlab(&["classify-drift", s(&p), "--class", "D", "--q", "2", "--q1", "inf", "--q2", "inf"], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["member"], serde_json::Value::Bool(true));
    let o = fdlab(&["classify-drift", s(&p), "--class", "X", "--q1", "inf", "--q2", "inf"], &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn boussinesq_writes_energy_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_scenario(tmp.path(), "fluid.toml", SMALL_FLUID);
    let out = tmp.path().join("fluid");
    let o = fdlab(&["boussinesq", s(&p), "--out", s(&out)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["energy.csv", "energy_report.json", "manifest.json", "theta_00000.json", "u_00010.json", "v_00005.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let csv = fs::read_to_string(out.join("energy.csv")).unwrap();
    assert!(csv.starts_with("time,heat,entropy,kinetic,"));
    assert_eq!(csv.lines().count(), 1 + 11);
}

#[test]
fn bundled_scenarios_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut count = 0;
    for e in fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let sc = scenario::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            sc.prepare().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            count += 1;
        }
    }
    assert!(count >= 10);
}
