use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn tedsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tedsim")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = tedsim(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn quantize_echoes_its_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let params = data("circuit_reference.json");
    run_ok(&["quantize", "--params", s(&params), "--out", s(dir.path()), "--quiet"]);
    let q = json(&dir.path().join("quantized.json"));
    assert_eq!(q["inputs"]["circuit"], json(&params));
    let f = q["derived"]["omega_d_GHz"].as_f64().unwrap();
    assert!(f > 2.5 && f < 3.5, "omega_d {f}");

    // The device section feeds straight into the single-device commands.
    let again = dir.path().join("again");
    let qfile = dir.path().join("quantized.json");
    run_ok(&["scatter", "--params", s(&qfile), "--sweep", s(&data("sweep_scatter.json")), "--out", s(&again), "--quiet"]);
    assert_eq!(column(&again.join("scatter.csv"), "r_abs").len(), 41);
}

#[test]
fn missing_input_is_a_config_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_params.json");
    let out = tedsim(&["pitch-detect", "--params", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(s(&missing)), "stderr: {err}");
}

#[test]
fn missing_flag_and_bad_truncation_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = tedsim(&["scatter", "--params", s(&data("source_ted.json")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sweep"));

    let out = tedsim(&["emit", "--params", s(&data("source_ted.json")), "--trunc", "x=3", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));

    let out = tedsim(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_points_exit_two_and_land_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.json");
    std::fs::write(&sweep, r#"{ "axis1": { "name": "n_bar", "values": [0.1, -1.0] } }"#).unwrap();
    let out_dir = dir.path().join("o");
    let out = tedsim(&["scatter", "--params", s(&data("source_ted.json")), "--sweep", s(&sweep), "--out", s(&out_dir), "--quiet"]);
    assert_eq!(out.status.code(), Some(2));
    let m = json(&out_dir.join("manifest.json"));
    assert_eq!(m["exit_code"], 2);
    assert_eq!(m["errors"][0]["index"], 1);
    let r = column(&out_dir.join("scatter.csv"), "r_abs");
    assert!(r[0].is_finite() && r[1].is_nan());
}

#[test]
fn pitch_detect_peaks_at_resonance() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.json");
    std::fs::write(&sweep, r#"{ "axis1": { "name": "delta_omega_wm_MHz", "values": [-1.0, 0.0, 1.0] } }"#).unwrap();
    let out = run_ok(&[
        "pitch-detect",
        "--params",
        s(&data("network_reference.json")),
        "--protocol",
        s(&data("pitch_detect_protocol.json")),
        "--sweep",
        s(&sweep),
        "--out",
        s(dir.path()),
    ]);
    let progress = String::from_utf8_lossy(&out.stderr);
    assert_eq!(progress.lines().filter(|l| l.contains("point")).count(), 3, "{progress}");
    let p = column(&dir.path().join("pitch_detect.csv"), "p_detect");
    let best = p.iter().cloned().fold(f64::MIN, f64::max);
    assert!(best > 0.9, "max p_detect {best}");
    assert_eq!(p[1], best);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "detect".to_string(),
            "--params".into(),
            s(&data("detector_ted.json")).into(),
            "--sweep".into(),
            s(&data("sweep_detect.json")).into(),
            "--jobs".into(),
            "2".into(),
            "--quiet".into(),
            "--out".into(),
            s(out).into(),
        ]
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let owned = args(out);
        run_ok(&owned.iter().map(String::as_str).collect::<Vec<_>>());
    }
    for f in ["detect.csv", "detect.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    run_ok(&[
        "emit",
        "--params",
        s(&data("source_ted.json")),
        "--initial",
        "superposition",
        "--trunc",
        "d=2,c=2,w=3",
        "--samples",
        "101",
        "--out",
        s(&first),
        "--quiet",
    ]);
    let m = json(&first.join("manifest.json"));
    assert_eq!(m["job"]["command"], "emit");
    let outputs: Vec<String> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    assert_eq!(outputs.len(), 4);

    let second = dir.path().join("second");
    run_ok(&["replay", s(&first.join("manifest.json")), "--out", s(&second), "--quiet"]);
    for f in &outputs {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
    let m2 = json(&second.join("manifest.json"));
    assert_eq!(m2["inputs"], m["inputs"]);
    assert_eq!(m2["resolved"], m["resolved"]);
}

#[test]
fn dispersion_header_and_symmetry() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["dispersion", "--params", s(&data("circuit_reference.json")), "--points", "9", "--out", s(dir.path()), "--quiet"]);
    let path = dir.path().join("dispersion.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "phi_bar,omega_d_GHz,omega_c_GHz,omega_w_GHz");
    let wc = column(&path, "omega_c_GHz");
    assert_eq!(wc.len(), 9);
    assert!((wc[0] - wc[8]).abs() < 1e-9);
    assert!(wc[4] > wc[0]);
}

#[test]
fn fock_check_runs_with_default_protocol() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["fock-check", "--params", s(&data("network_reference.json")), "--out", s(dir.path()), "--quiet"]);
    let b = column(&dir.path().join("fock_check.csv"), "b12_photons");
    assert_eq!(b.len(), 4);
    let max = b.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(b[3], max);
}
