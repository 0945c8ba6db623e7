use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robin-bubble")).args(args).arg("--out").arg(dir).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn ball_analytic_reports_the_root_and_table() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["ball-analytic"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ball_analytic.json")).unwrap()).unwrap();
    assert!((json["lambda_star"].as_f64().unwrap() - 1.43923).abs() < 1e-5);
    assert!(json["residual"].as_f64().unwrap().abs() < 1e-10);
    let table = fs::read_to_string(dir.path().join("ball_g0.csv")).unwrap();
    assert!(table.starts_with("lambda,g0\n"));
    let rows = csv_rows(&table);
    let at_one = rows.iter().find(|r| r[0] == 1.0).unwrap();
    assert!((at_one[1] + 1.0 / (4.0 * PI)).abs() < 1e-15);
    // 17 significant digits
    assert!(table.lines().nth(1).unwrap().starts_with("5.0000000000000000e-1,"));
}

#[test]
fn robin_map_is_deterministic_and_peaks_at_the_centre() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"domain": {"kind": "ball", "radius": 1.0}, "lambda": 1.2, "grid": 7}"#);
    let first = run(dir.path(), &["robin-map", "--config", &cfg]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let a = fs::read_to_string(dir.path().join("robin_map.csv")).unwrap();
    run(dir.path(), &["robin-map", "--config", &cfg]);
    let b = fs::read_to_string(dir.path().join("robin_map.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("x,y,z,g,residual\n"));
    let rows = csv_rows(&a);
    let best = rows.iter().max_by(|p, q| p[3].total_cmp(&q[3])).unwrap();
    assert!(best[0].abs() + best[1].abs() + best[2].abs() < 1e-12);
    // margin 0.02 · diameter
    assert!(rows.iter().all(|r| 1.0 - (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt() >= 0.04));
    assert!(!dir.path().join("robin_map.csv.tmp").exists());
}

#[test]
fn lambda_star_on_the_unit_ball() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["lambda-star"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("lambda_star.json")).unwrap()).unwrap();
    assert!((json["lambda_star"].as_f64().unwrap() - 1.43923).abs() < 1e-3);
    assert!(json["metadata"]["multistart"].is_string());
    let hist = fs::read_to_string(dir.path().join("lambda_star_history.csv")).unwrap();
    assert!(hist.starts_with("lambda,M\n") && hist.lines().count() > 3);
}

#[test]
fn energy_sweep_emits_one_row_per_scale() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["energy-sweep", "--lambda", "1.49", "--mu-list", "0.2,0.1,0.05"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("energy_sweep.csv")).unwrap();
    assert!(csv.starts_with("mu,E_measured,E_model,remainder\n"));
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| (r[3] - (r[1] - r[2])).abs() < 1e-12));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let bad = write_config(dir.path(), r#"{"domain": {"kind": "cube"}}"#);
    assert_eq!(run(dir.path(), &["robin-map", "--config", &bad, "--lambda", "1"]).status.code(), Some(1));
    let unknown = write_config(dir.path(), r#"{"lambda": 1.0, "colour": "red"}"#);
    assert_eq!(run(dir.path(), &["robin-map", "--config", &unknown]).status.code(), Some(1));
    let negative = write_config(dir.path(), r#"{"tolerances": {"symmetry": -1.0}}"#);
    assert_eq!(run(dir.path(), &["verify", "--config", &negative]).status.code(), Some(1));
    let out = run(dir.path(), &["robin-map"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
    assert_eq!(run(dir.path(), &["robin-map", "--config", "/nonexistent/config.json"]).status.code(), Some(1));
}

#[test]
fn verify_passes_on_the_ball_and_fails_on_impossible_tolerances() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["verify"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);

    let strict = write_config(dir.path(), r#"{"verify_points": 800, "tolerances": {"energy_slope": 10.0}}"#);
    let out = run(dir.path(), &["verify", "--config", &strict]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL energy_expansion_slope"));
}
