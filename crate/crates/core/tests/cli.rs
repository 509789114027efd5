use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const RESONANT: &str =
    "[layer1]\ngamma = 1.1547005383792515\n[layer3]\ngamma = 1.1547005383792515\n";

fn run(dir: &Path, config: Option<&str>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_acl-beam"));
    if let Some(text) = config {
        let path = dir.join("run.toml");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.args(args).current_dir(dir).output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn derive_normalized_prints_unit_speeds() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), None, &["derive", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("\"zeta_plus\": 1.0"), "{stdout}");
    let manifest = read_json(&tmp.path().join("o/manifest.json"));
    assert_eq!(manifest["command"], "derive");
    assert_eq!(manifest["outputs"][0], "derived.json");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn derive_resonant_ratio_is_three() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), Some(RESONANT), &["derive", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("\"ratio\": 3.0"));
}

#[test]
fn missing_config_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_acl-beam"))
        .args(["derive", "--config", "does-not-exist.toml"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("does-not-exist.toml"));
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let out = run(
        tmp.path(),
        Some("[numerics]\nsteps = 3\n"),
        &["derive", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("steps"), "{}", stderr(&out));
}

#[test]
fn every_violation_is_listed() {
    let tmp = TempDir::new().unwrap();
    let out = run(
        tmp.path(),
        Some("[layer2]\nh = 0.0\n[gains]\nk1 = -1.0\n[numerics]\ndt = 0.0\n"),
        &["derive"],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("middle layer thickness must be positive (got 0)"),
        "{err}"
    );
    assert!(err.contains("gains.k1"), "{err}");
    assert!(err.contains("numerics.dt"), "{err}");
}

#[test]
fn verify_resonance_on_resonant_config() {
    let tmp = TempDir::new().unwrap();
    let out = run(
        tmp.path(),
        Some(RESONANT),
        &["verify-theorem1", "--out", "o", "--n-elems", "16"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = read_json(&tmp.path().join("o/resonant_mode.json"));
    assert!(report["strong_form_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(
        (report["n"].as_u64(), report["m"].as_u64()),
        (Some(2), Some(1))
    );
    let im = report["matched_eigenvalue"]["im"].as_f64().unwrap();
    assert!((im - 3f64.sqrt() * std::f64::consts::PI / 2.0).abs() < 1e-2);
}

#[test]
fn verify_resonance_rejects_non_resonant_config() {
    let tmp = TempDir::new().unwrap();
    let out = run(
        tmp.path(),
        Some("[layer1]\ngamma = 0.3\n[layer3]\ngamma = 0.3\n"),
        &["verify-theorem1", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("NotResonant"), "{}", stderr(&out));
    let out = run(tmp.path(), None, &["verify-theorem1", "--out", "o"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("NotResonant"));
}

#[test]
fn spectrum_of_conservative_config_is_on_the_axis() {
    let tmp = TempDir::new().unwrap();
    let cfg = "[gains]\nk1 = 0.0\nk2 = 0.0\ns1 = 0.0\ns3 = 0.0\n[numerics]\nn_elems = 8\n";
    let out = run(tmp.path(), Some(cfg), &["spectrum", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = read_json(&tmp.path().join("o/spectrum.json"));
    let values = report["eigenvalues"].as_array().unwrap();
    assert_eq!(values.len(), 2 * 6 * 8);
    assert!(values.iter().all(|v| v["class"] == "ImaginaryAxis"));
}

#[test]
fn zero_horizon_gives_single_row() {
    let tmp = TempDir::new().unwrap();
    let out = run(
        tmp.path(),
        Some("[numerics]\nhorizon = 0.0\nn_elems = 4\n"),
        &["simulate", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("o/trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].ends_with("p1_dot_L,p3_dot_L"));
}

#[test]
fn zero_gains_conserve_energy() {
    let tmp = TempDir::new().unwrap();
    let cfg =
        "[gains]\nk1 = 0.0\nk2 = 0.0\ns1 = 0.0\ns3 = 0.0\n[numerics]\nn_elems = 8\nhorizon = 1.0\n";
    let out = run(tmp.path(), Some(cfg), &["simulate", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = read_json(&tmp.path().join("o/summary.json"));
    assert!(summary["relative_change"].as_f64().unwrap().abs() <= 1e-10);
}

#[test]
fn electrostatic_simulation_reports_decay() {
    let tmp = TempDir::new().unwrap();
    let cfg = "[beam]\nmodel = \"electrostatic\"\n[numerics]\nn_elems = 8\nhorizon = 5.0\n";
    let out = run(tmp.path(), Some(cfg), &["simulate", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8(out.stdout).unwrap().contains("omega="));
    let summary = read_json(&tmp.path().join("o/summary.json"));
    assert!(summary["fit"]["omega"].as_f64().unwrap() > 0.0);

    let out = run(tmp.path(), Some(cfg), &["decay", "--out", "d"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(
        read_json(&tmp.path().join("d/decay.json"))["omega"]
            .as_f64()
            .unwrap()
            > 0.0
    );
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = "[beam]\nmodel = \"electrostatic\"\n[numerics]\nn_elems = 6\nhorizon = 0.5\n";
    for dir in ["a", "b"] {
        let out = run(
            tmp.path(),
            Some(cfg),
            &["simulate", "--out", dir, "--seed", "9"],
        );
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for file in ["trajectory.csv", "summary.json", "manifest.json"] {
        let a = fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let out = run(
        tmp.path(),
        Some(cfg),
        &["simulate", "--out", "c", "--seed", "10"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(
        fs::read(tmp.path().join("a/trajectory.csv")).unwrap(),
        fs::read(tmp.path().join("c/trajectory.csv")).unwrap()
    );
}

#[test]
fn resonance_scan_flags_the_resonant_coefficient() {
    let tmp = TempDir::new().unwrap();
    let cfg = "[resonance]\ngamma_min = 1.1547005383792515\ngamma_max = 1.1547005383792515\ngamma_steps = 1\n";
    let out = run(tmp.path(), Some(cfg), &["resonance", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("o/resonance.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",true,2,1"), "{csv}");
}

#[test]
fn compare_needs_electrostatic_model() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), None, &["compare", "--out", "o"]);
    assert_eq!(out.status.code(), Some(3));

    let out = run(
        tmp.path(),
        Some("[beam]\nmodel = \"electrostatic\"\n"),
        &["compare", "--out", "o", "--n-elems", "8"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = read_json(&tmp.path().join("o/compare.json"));
    assert!(summary["pairs"].as_u64().unwrap() > 10);
    assert!(fs::read_to_string(tmp.path().join("o/compare.csv"))
        .unwrap()
        .starts_with("idx,im_decoupled"));
}

#[test]
fn zero_coupling_compare_is_exact() {
    let tmp = TempDir::new().unwrap();
    let cfg = "[beam]\nmodel = \"electrostatic\"\n[layer2]\ng2 = 0.0\n[numerics]\nn_elems = 8\n";
    let out = run(tmp.path(), Some(cfg), &["compare", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("o/compare.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let diff: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(diff <= 1e-10, "{line}");
    }
}
