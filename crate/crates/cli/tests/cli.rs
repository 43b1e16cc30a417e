use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn inertial(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inertial"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.json");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap()
}

#[test]
fn default_sweep_writes_documented_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = inertial(tmp.path(), &["sweep", "--model", "ho"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&tmp.path().join("out/sweep.csv"));
    assert_eq!(&header[..7], ["t_f", "status", "chi0", "F_inertial", "F_adiabatic", "neglog1mF_inertial", "neglog1mF_adiabatic"]);
    assert_eq!(rows.len(), 20);
    let t_f: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(t_f.windows(2).all(|w| w[0] < w[1]));
    for r in &rows {
        let (fi, fa): (f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
        assert!(fi >= fa && fi <= 1.0 + 1e-12);
    }
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["columns"].as_array().unwrap().len(), header.len());
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut seen = vec![];
    for _ in 0..2 {
        let out = inertial(tmp.path(), &["sweep", "--model", "tls", "--threads", "3"]);
        assert_eq!(out.status.code(), Some(0));
        seen.push((
            std::fs::read(tmp.path().join("out/sweep.csv")).unwrap(),
            std::fs::read(tmp.path().join("out/manifest.json")).unwrap(),
        ));
    }
    assert!(seen[0] == seen[1]);
}

#[test]
fn retraced_circuit_has_no_phase() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"model": "tls", "geo": {"family": "spin", "loss": 0.3,
            "circuit": {"kind": "retraced", "waypoints": [[0.2, 0.1, 0.9], [0.5, -0.3, 0.7], [-0.1, 0.4, 1.1]]}}}"#,
    );
    let out = inertial(tmp.path(), &["geo", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&tmp.path().join("out/geo.csv"));
    let col = header.iter().position(|h| h == "phase_line").unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(r[col].parse::<f64>().unwrap().abs() < 1e-10, "{r:?}");
    }
}

#[test]
fn lossy_spin_square_line_matches_surface() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"model": "tls", "geo": {"family": "spin", "loss": 0.3}}"#);
    let out = inertial(tmp.path(), &["geo", "--config", &cfg, "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/geo.json")).unwrap()).unwrap();
    let cols: Vec<&str> = doc["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    let line = cols.iter().position(|c| *c == "phase_line").unwrap();
    let diff = cols.iter().position(|c| *c == "line_minus_surface").unwrap();
    let mut largest = 0.0f64;
    for row in doc["rows"].as_array().unwrap() {
        largest = largest.max(row[line].as_f64().unwrap().abs());
        assert!(row[diff].as_f64().unwrap().abs() < 1e-6, "{row}");
    }
    assert!(largest > 1e-3, "circuit should enclose curvature");
}

#[test]
fn empty_config_lists_required_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = inertial(tmp.path(), &["sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ConfigInvalid") && err.contains("model"), "{err}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn bad_value_names_its_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"model": "ho", "numerics": {"grid": {"n": 0}}}"#);
    let out = inertial(tmp.path(), &["sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numerics.grid.n"));
    let out = inertial(tmp.path(), &["open", "--model", "ho"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_points_give_partial_status() {
    // the shortest durations need |chi0| > 2, outside the oscillator's domain
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"model": "ho", "numerics": {"grid": {"lo": 0.01, "hi": 1.0, "n": 6}}}"#);
    let out = inertial(tmp.path(), &["sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&tmp.path().join("out/sweep.csv"));
    assert_eq!(rows.len(), 6);
    assert_ne!(rows[0][1], "ok");
    assert_eq!(rows[5][1], "ok");
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "partial");
    assert_eq!(m["failures"][0]["index"], 0);
}

#[test]
fn open_run_preserves_trace_and_positivity() {
    let tmp = tempfile::tempdir().unwrap();
    let out = inertial(tmp.path(), &["open", "--model", "tls"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&tmp.path().join("out/open.csv"));
    let tr = header.iter().position(|h| h == "trace_deviation").unwrap();
    let ev = header.iter().position(|h| h == "min_eigenvalue").unwrap();
    let pe = header.iter().position(|h| h == "p_excited").unwrap();
    assert_eq!(rows.len(), 101);
    for r in &rows {
        assert!(r[tr].parse::<f64>().unwrap().abs() < 1e-10);
        assert!(r[ev].parse::<f64>().unwrap() > -1e-7);
        let p: f64 = r[pe].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn single_and_diagnose_cover_every_model() {
    let tmp = tempfile::tempdir().unwrap();
    for model in ["ho", "tls", "two-spin"] {
        for cmd in ["single", "diagnose"] {
            let out = inertial(tmp.path(), &[cmd, "--model", model]);
            assert_eq!(out.status.code(), Some(0), "{cmd} {model}: {}", String::from_utf8_lossy(&out.stderr));
        }
    }
}
