use std::path::Path;
use std::process::{Command, Output};

use gnar_cli::svg::count_points;
use serde_json::Value;

const FIVENET: &str = "1\t4\n1\t5\n2\t3\n2\t4\n3\t4\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnar"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn simulated(length: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("net.txt"), FIVENET).unwrap();
    ok(
        dir.path(),
        &[
            "-q", "--seed", "3", "simulate", "--network", "net.txt", "--alpha", "0.4,0.15", "--beta", "0.2,0.1;0.1",
            "-T", length, "-o", "sim.csv",
        ],
    );
    dir
}

#[test]
fn simulate_then_fit_recovers_coefficients() {
    let dir = simulated("5000");
    let fit: Value =
        serde_json::from_str(&ok(dir.path(), &["-q", "fit", "--series", "sim.csv", "--network", "net.txt", "--order", "2,[2,1]"]))
            .unwrap();
    let alpha: Vec<f64> = serde_json::from_value(fit["alpha"].clone()).unwrap();
    let beta: Vec<Vec<f64>> = serde_json::from_value(fit["beta"].clone()).unwrap();
    let got = [alpha[0], alpha[1], beta[0][0], beta[0][1], beta[1][0]];
    for (g, want) in got.iter().zip([0.4, 0.15, 0.2, 0.1, 0.1]) {
        assert!((g - want).abs() < 0.05, "{got:?}");
    }
}

#[test]
fn unknown_flag_exits_one_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["fit", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn missing_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["fit", "--series", "nope.csv", "--network", "nope.txt", "--order", "1,[1]"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pnacf_corbit_cuts_off_after_lag_two() {
    let dir = simulated("3000");
    ok(
        dir.path(),
        &["-q", "corbit", "--series", "sim.csv", "--network", "net.txt", "--kind", "pnacf", "--max-h", "6", "--max-r", "2", "-o", "c.json"],
    );
    let json: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    let values: Vec<Vec<f64>> = serde_json::from_value(json["grid"]["values"].clone()).unwrap();
    let band: f64 = json["grid"]["null_band"].as_f64().unwrap();
    assert!(values[0][0] > 0.25, "{values:?}");
    for row in &values[2..] {
        for v in row {
            assert!(v.abs() < 1.5 * band, "{values:?} band {band}");
        }
    }
    let svg = std::fs::read_to_string(dir.path().join("c.svg")).unwrap();
    assert_eq!(count_points(&svg), 6 * 2 + 1);
}

#[test]
fn wagner_writes_one_grid_per_slice() {
    let dir = simulated("300");
    ok(
        dir.path(),
        &[
            "-q", "wagner", "--series", "sim.csv", "--network", "net.txt", "--slices", "1:150,151:300", "--max-h", "4",
            "--max-r", "2", "-o", "w.json",
        ],
    );
    let json: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("w.json")).unwrap()).unwrap();
    assert_eq!(json["grids"].as_array().unwrap().len(), 2);
    let svg = std::fs::read_to_string(dir.path().join("w.svg")).unwrap();
    assert_eq!(count_points(&svg), 4 * 2 * 3);
}

#[test]
fn forecast_and_spectral_verify_run_from_fit_json() {
    let dir = simulated("400");
    ok(
        dir.path(),
        &["-q", "fit", "--series", "sim.csv", "--network", "net.txt", "--order", "2,[2,1]", "-o", "fit.json"],
    );
    let fc = ok(dir.path(), &["-q", "forecast", "--fit", "fit.json", "--series", "sim.csv", "--network", "net.txt", "--steps", "3"]);
    assert_eq!(fc.lines().count(), 4, "{fc}");
    let report: Value = serde_json::from_str(&ok(
        dir.path(),
        &["-q", "spectral-verify", "--coeffs", "fit.json", "--network", "net.txt"],
    ))
    .unwrap();
    assert!(report["max_offsupport"].as_f64().unwrap() < 1e-10, "{report}");
}
