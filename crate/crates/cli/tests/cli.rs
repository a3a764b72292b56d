use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn yglue(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_yglue"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("YGLUE_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> Output {
    let o = yglue(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(String::from).collect()
}

fn csv_rows(path: &Path) -> usize {
    csv::Reader::from_path(path).unwrap().records().count()
}

/// The manifest lists every artifact, which must exist, and nothing else.
fn check_manifest(dir: &Path, command: &str, expected: &[&str]) -> Value {
    let m = json(&dir.join("manifest.json"));
    assert_eq!(m["command"], command);
    assert!(m["config"]["kappa"].is_f64());
    assert!(m["version"].is_string());
    assert!(m["timings"].is_array());
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(outputs, expected);
    for f in outputs {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    m
}

fn numeric_column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|row| row.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn fowler_writes_trajectory_csv() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["fowler", "--n", "3", "--eps", "0.3", "--span", "5"]);
    let csv = tmp.path().join("fowler.csv");
    assert_eq!(csv_header(&csv), ["t", "v", "vdot", "H"]);
    assert_eq!(csv_rows(&csv), 5001);
    let h = numeric_column(&csv, "H");
    assert!(h.iter().all(|x| (x - h[0]).abs() < 1e-10));
    check_manifest(tmp.path(), "fowler", &["fowler.csv"]);
}

#[test]
fn fowler_period_table() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["fowler", "period-table", "--count", "5"]);
    let csv = tmp.path().join("period_table.csv");
    assert_eq!(csv_header(&csv), ["eps", "period"]);
    let periods = numeric_column(&csv, "period");
    assert_eq!(periods.len(), 5);
    assert!(periods.windows(2).all(|w| w[1] < w[0]));
    check_manifest(tmp.path(), "fowler period-table", &["period_table.csv"]);
}

#[test]
fn same_inputs_give_identical_bytes() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        ok(dir.path(), &["fowler", "--eps", "0.2", "--span", "3"]);
        ok(dir.path(), &["linop", "solve", "--level", "2", "--seed", "11", "--t-max", "4"]);
    }
    for f in ["fowler.csv", "linop_solve.csv", "linop_solve.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn modes_decompose_reads_grid_samples() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["modes", "grid", "--k-max", "2"]);
    let grid = tmp.path().join("grid.csv");
    assert_eq!(csv_header(&grid), ["point", "x", "y", "z", "weight"]);
    let mut reader = csv::Reader::from_path(&grid).unwrap();
    let mut samples = String::from("x,y,z,c0\n");
    for row in reader.records() {
        let row = row.unwrap();
        let z: f64 = row[3].parse().unwrap();
        samples.push_str(&format!("{},{},{},{}\n", &row[1], &row[2], &row[3], 3.0 * z * z - 1.0));
    }
    let input = tmp.path().join("samples.csv");
    fs::write(&input, samples).unwrap();
    ok(tmp.path(), &["modes", "decompose", "--input", input.to_str().unwrap(), "--k-max", "2"]);
    let c = json(&tmp.path().join("coefficients.json"));
    assert_eq!(c["k_max"], 2);
    assert_eq!(c["dim"], 1);
    let coeffs: Vec<f64> = c["coeffs"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(coeffs.len(), 9);
    // 3z² - 1 = sqrt(16π/5) Y_{2,0}, flat slot 6
    let expected = (16.0 * std::f64::consts::PI / 5.0).sqrt();
    for (slot, v) in coeffs.iter().enumerate() {
        let target = if slot == 6 { expected } else { 0.0 };
        assert!((v - target).abs() < 1e-12, "slot {slot}: {v}");
    }
    check_manifest(tmp.path(), "modes decompose", &["coefficients.json"]);
}

#[test]
fn modes_decompose_rejects_foreign_points() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("bad.csv");
    fs::write(&input, "x,y,z,c0\n0,0,1,1\n").unwrap();
    let o = yglue(tmp.path(), &["modes", "decompose", "--input", input.to_str().unwrap(), "--k-max", "1"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("not grid node"));
}

#[test]
fn linop_sweep_reports_verdicts_per_weight() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["linop", "sweep", "--kind", "prop32", "--delta", "1.0", "3.0", "--jobs", "2"]);
    for (file, in_window) in [("sweep-high-delta1.json", true), ("sweep-high-delta3.json", false)] {
        let r = json(&tmp.path().join(file));
        assert_eq!(r["verdict"], true);
        assert_eq!(r["in_window"], in_window);
        assert!(r["ratios"].is_array() && r["grid"].is_array());
    }
    let merged = json(&tmp.path().join("sweep.json"));
    assert_eq!(merged.as_array().unwrap().len(), 2);
    check_manifest(tmp.path(), "linop sweep", &["sweep-high-delta1.json", "sweep-high-delta3.json", "sweep.json"]);

    let serial = TempDir::new().unwrap();
    ok(serial.path(), &["linop", "sweep", "--kind", "high", "--delta", "1.0", "3.0"]);
    assert_eq!(fs::read(tmp.path().join("sweep.json")).unwrap(), fs::read(serial.path().join("sweep.json")).unwrap());
}

#[test]
fn linop_solve_schema() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["linop", "solve", "--level", "0", "--t-max", "5"]);
    assert_eq!(csv_header(&tmp.path().join("linop_solve.csv")), ["t", "f0", "f1", "w0", "w1"]);
    let r = json(&tmp.path().join("linop_solve.json"));
    assert_eq!(r["solver"], "LowBackward");
    assert!(r["ratio"].as_f64().unwrap() > 0.0);
    let m = check_manifest(tmp.path(), "linop solve", &["linop_solve.csv", "linop_solve.json"]);
    assert_eq!(m["seed"], 7);
}

const FIELD_HEADER: [&str; 10] = ["t", "r", "point", "x", "y", "z", "v0", "v1", "u0", "u1"];

#[test]
fn interior_solve_schema() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["interior", "solve", "--eps", "0.1", "--model", "flat", "--stride", "50"]);
    assert_eq!(csv_header(&tmp.path().join("interior.csv")), FIELD_HEADER);
    let r = json(&tmp.path().join("interior_report.json"));
    assert_eq!(r["model"], "flat");
    assert!(r["residual"].as_f64().unwrap() < 1e-6);
    assert!(!r["fixed_point"]["updates"].as_array().unwrap().is_empty());
    check_manifest(tmp.path(), "interior solve", &["interior.csv", "interior_report.json"]);
}

#[test]
fn interior_rejects_bad_translation() {
    let tmp = TempDir::new().unwrap();
    let o = yglue(tmp.path(), &["interior", "solve", "--a", "0.1,0.2"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected n = 3"));
}

#[test]
fn exterior_solve_and_nondeg() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["exterior", "solve", "--eps", "0.1", "--rho", "0.002,0.003", "--stride", "50"]);
    assert_eq!(csv_header(&tmp.path().join("exterior.csv")), FIELD_HEADER);
    let r = json(&tmp.path().join("exterior_report.json"));
    assert_eq!(r["rho"], serde_json::json!([0.002, 0.003]));
    check_manifest(tmp.path(), "exterior solve", &["exterior.csv", "exterior_report.json"]);

    let nd = TempDir::new().unwrap();
    ok(nd.path(), &["exterior", "nondeg", "--kappa", "1"]);
    let r = json(&nd.path().join("nondeg.json"));
    assert_eq!(r["nondegenerate"], false);
    assert_eq!(r["degenerate"][0]["level"], 1);
    assert_eq!(r["degenerate"][0]["branch"], "Parallel");
    ok(nd.path(), &["exterior", "nondeg"]);
    assert_eq!(json(&nd.path().join("nondeg.json"))["nondegenerate"], true);
}

#[test]
fn glue_writes_fields_and_reports() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["glue", "--eps", "0.1", "--sector", "radial", "--stride", "100"]);
    for f in ["interior.csv", "exterior.csv"] {
        assert_eq!(csv_header(&tmp.path().join(f)), FIELD_HEADER);
    }
    let m = json(&tmp.path().join("matching.json"));
    for key in ["params", "eta", "alpha", "gaps", "residual", "matching", "interior_contraction", "exterior_contraction", "windows"] {
        assert!(!m[key].is_null(), "matching.json lacks {key}");
    }
    assert_eq!(m["sector"], "radial");
    assert!(m["gaps"].as_array().unwrap().iter().all(|g| g["value"].as_f64().unwrap() < 1e-8));
    let a = json(&tmp.path().join("asymptotics.json"));
    for key in ["far_field", "inner_ratio", "inner_deviation"] {
        assert!(!a[key].is_null(), "asymptotics.json lacks {key}");
    }
    check_manifest(tmp.path(), "glue", &["interior.csv", "exterior.csv", "matching.json", "asymptotics.json"]);
}

#[test]
fn config_from_environment_with_named_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let defaults = Command::new(env!("CARGO_BIN_EXE_yglue")).arg("config").env_remove("YGLUE_CONFIG").output().unwrap();
    let mut cfg: Value = serde_json::from_slice(&defaults.stdout).unwrap();
    cfg["s_exponent"] = serde_json::json!(1.2);
    let path = tmp.path().join("config.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_yglue"))
        .args(["--out", tmp.path().to_str().unwrap(), "fowler", "--span", "1"])
        .env("YGLUE_CONFIG", &path)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(json(&tmp.path().join("manifest.json"))["config"]["s_exponent"], 1.2);

    cfg["kappa"] = serde_json::json!(-1.0);
    fs::write(&path, cfg.to_string()).unwrap();
    let o = yglue(tmp.path(), &["--config", path.to_str().unwrap(), "fowler"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("kappa"));

    cfg.as_object_mut().unwrap().remove("r1");
    fs::write(&path, cfg.to_string()).unwrap();
    let o = yglue(tmp.path(), &["--config", path.to_str().unwrap(), "fowler"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing field `r1`"));
}

#[test]
fn stage_failures_exit_nonzero_with_tag() {
    let tmp = TempDir::new().unwrap();
    let o = yglue(tmp.path(), &["fowler", "--eps", "5"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("fowler stage"));
}

#[test]
fn verify_runs_the_suite() {
    let tmp = TempDir::new().unwrap();
    let o = ok(tmp.path(), &["verify", "--seed", "7"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 12);
    let r = json(&tmp.path().join("verify.json"));
    assert_eq!(r.as_array().unwrap().len(), 12);
    check_manifest(tmp.path(), "verify", &["verify.json"]);
}
