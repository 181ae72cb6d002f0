use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const UNIT_SQUARE_MODEL: &str = r#"{"intensity": 1.0, "grains": [{"rects": [[0, 1, 0, 1]], "p": 1.0}],
    "marks": [{"value": 1.0, "p": 1.0}], "lambda": 1.5}"#;

fn eulergram(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eulergram"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs `sub` on `config` into `dir/out`, returning the parsed report.
fn run(dir: &TempDir, sub: &str, config: &str, extra: &[&str]) -> Value {
    let cfg = dir.path().join(format!("{sub}.json"));
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let mut args = vec![
        sub,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = eulergram(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    read_report(&out)
}

fn read_report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn error_of(sub: &str, config: &str) -> (i32, Value) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let o = eulergram(&[
        sub,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let err =
        serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).expect("stderr is JSON");
    (o.status.code().unwrap(), err)
}

#[test]
fn chi_of_unit_disc_is_one() {
    let dir = TempDir::new().unwrap();
    let r = run(
        &dir,
        "chi",
        r#"{"shape": {"type": "disc", "center": [0, 0], "r": 1}, "epsilon": 0.01, "dump_grid": true}"#,
        &[],
    );
    assert_eq!(r["results"]["chi_local"], 1);
    assert_eq!(r["results"]["chi_vef"], 1);
    assert_eq!(r["results"]["components"], 1);
    assert_eq!(r["config"]["margin"], 2, "defaults are echoed");
    assert!(r["timestamp_unix"].is_u64());
    let pgm = fs::read(dir.path().join("out/grid.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));
}

#[test]
fn annulus_sweep_reaches_a_zero_plateau() {
    let dir = TempDir::new().unwrap();
    let r = run(
        &dir,
        "sweep",
        r#"{"shape": {"type": "annulus", "center": [0, 0], "r_in": 0.5, "r_out": 1.0},
            "epsilons": [0.2, 0.1, 0.05, 0.02, 0.01]}"#,
        &[],
    );
    let rows = r["results"]["rows"].as_array().unwrap();
    assert!(rows[2..].iter().all(|row| row["chi_local"] == 0));
    assert_eq!(r["results"]["plateau"]["value"], 0);
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn sweep_with_bicovariogram_column() {
    let dir = TempDir::new().unwrap();
    let r = run(
        &dir,
        "sweep",
        r#"{"shape": {"type": "disc", "center": [0, 0], "r": 1},
            "window": {"rects": [[-2, 0.5, -2, 2]]},
            "epsilons": [0.2, 0.1], "quad_mesh": 0.002}"#,
        &[],
    );
    for row in r["results"]["rows"].as_array().unwrap() {
        assert_eq!(row["chi_local"], 1);
        assert!((row["chi_bicovariogram"].as_f64().unwrap() - 1.0).abs() < 0.2);
    }
}

#[test]
fn shotnoise_monte_carlo_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let r = run(
        &dir,
        "shotnoise",
        &format!(
            r#"{{"model": {UNIT_SQUARE_MODEL}, "window": {{"rects": [[0, 10, 0, 10]]}},
                "replicates": 2000, "seed": 7000}}"#
        ),
        &[],
    );
    let mc = &r["results"]["monte_carlo"];
    let (mean, se) = (mc["mean"].as_f64().unwrap(), mc["stderr"].as_f64().unwrap());
    assert!((mean - 44.41).abs() <= 3.0 * se, "{mean} ± {se}");
    assert_eq!(r["seed"], 7000);
    let closed = &r["results"]["predictions"][0];
    assert_eq!(closed["method"], "closed_form");
    assert_eq!(closed["within_3se"], true);
    let reps = fs::read_to_string(dir.path().join("out/replicates.csv")).unwrap();
    assert_eq!(reps.lines().count(), 2001);
}

#[test]
fn reports_are_byte_identical_without_timestamp() {
    let config = format!(
        r#"{{"model": {UNIT_SQUARE_MODEL}, "epsilon": 0.01, "window": [0, 4, 0, 4],
            "replicates": 20, "seed": 5}}"#
    );
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let ra = run(&a, "densities", &config, &["--no-timestamp"]);
    run(&b, "densities", &config, &["--no-timestamp"]);
    assert!(ra.get("timestamp_unix").is_none());
    for f in ["report.json", "densities.csv"] {
        assert_eq!(
            fs::read(a.path().join("out").join(f)).unwrap(),
            fs::read(b.path().join("out").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn perimeter_of_unit_square() {
    let dir = TempDir::new().unwrap();
    let r = run(
        &dir,
        "perimeter",
        r#"{"polyrect": {"rects": [[0, 1, 0, 1]]}, "epsilons": [0.04, 0.02, 0.01],
            "quad_mesh": 0.001, "n_directions": 8}"#,
        &[],
    );
    assert!((r["results"]["per_inf"].as_f64().unwrap() - 4.0).abs() < 0.04);
    let csv = fs::read_to_string(dir.path().join("out/perimeter.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn random_bound_stress_holds() {
    let dir = TempDir::new().unwrap();
    let r = run(
        &dir,
        "bounds",
        r#"{"truth": {"type": "random", "trials": 4, "seed": 11}, "window": [60, 200, 50, 190]}"#,
        &[],
    );
    assert_eq!(r["results"]["checks"], 24);
    assert_eq!(r["results"]["all_hold"], true);
    assert_eq!(r["seed"], 11);
}

#[test]
fn shape_bounds_write_pair_tables() {
    let dir = TempDir::new().unwrap();
    run(
        &dir,
        "bounds",
        r#"{"truth": {"type": "shape", "shape": {"type": "disc", "center": [0, 0], "r": 0.5},
                      "fine_epsilon": 0.01},
            "factors": [4], "window": [-0.3, 0.3, -0.3, 0.3]}"#,
        &[],
    );
    for f in [
        "bounds.csv",
        "pairs_interior_k4.csv",
        "pairs_boundary_k4.csv",
    ] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn invalid_configs_are_reported_as_json() {
    let (code, e) = error_of(
        "chi",
        r#"{"shape": {"type": "disc", "center": [0, 0], "r": 1}, "epsilon": -1}"#,
    );
    assert_ne!(code, 0);
    assert_eq!(e["error"], "ConfigInvalid");

    let (_, e) = error_of(
        "chi",
        r#"{"shape": {"type": "disc", "center": [0, 0], "r": 1}, "epsilon": 0.1, "typo": 1}"#,
    );
    assert_eq!(e["error"], "ConfigInvalid");

    let (_, e) = error_of(
        "sweep",
        r#"{"shape": {"type": "disc", "center": [0, 0], "r": 1}, "epsilons": [0.1, 0.2]}"#,
    );
    assert_eq!(e["error"], "ConfigInvalid");
}

#[test]
fn library_errors_keep_module_and_name() {
    let (code, e) = error_of(
        "chi",
        r#"{"shape": {"type": "disc", "center": [0, 0], "r": -1}, "epsilon": 0.1}"#,
    );
    assert_ne!(code, 0);
    assert_eq!(e["module"], "shapes");
    assert_eq!(e["error"], "InvalidSpec");

    let (_, e) = error_of(
        "shotnoise",
        &format!(
            r#"{{"model": {UNIT_SQUARE_MODEL}, "window": {{"rects": [[0, 1, 0, 1]]}}, "replicates": 1, "seed": 0}}"#
        ),
    );
    assert_eq!(e["module"], "randomsets");
    assert_eq!(e["error"], "InvalidArgument");
}

#[test]
fn missing_arguments_exit_with_usage_error() {
    let o = eulergram(&["chi", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let e: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(e["error"], "Usage");
}
