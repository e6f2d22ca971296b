use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_thermoform");

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .args(["--grid-size", "40", "--deterministic"])
        .env_clear()
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn scalar(dir: &Path, name: &str) -> String {
    rows(&dir.join("scalars.csv"))
        .into_iter()
        .find(|r| r[0] == name)
        .unwrap_or_else(|| panic!("no scalar {name}"))[1]
        .clone()
}

#[test]
fn free_potential_has_unit_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--potential", "P0"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lambda: f64 = scalar(dir.path(), "lambda").parse().unwrap();
    assert!((lambda - 1.0).abs() <= 1e-10);
    assert_eq!(scalar(dir.path(), "subcommand"), "solve");
    assert!(rows(&dir.path().join("checks.csv")).iter().all(|r| r[5] == "pass"));
    assert!(dir.path().join("eigen.csv").exists());
}

#[test]
fn zero_temperature_sweep_for_the_single_site_potential() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["zerotemp", "--potential", "P1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = rows(&dir.path().join("zerotemp.csv"));
    assert_eq!(sweep.len(), 7);
    assert!(sweep.iter().all(|r| r[4] == "true"));
    let gap: f64 = sweep.last().unwrap()[3].parse().unwrap();
    assert!(gap.abs() <= 0.05);
}

#[test]
fn antiferromagnetic_fkg_is_informational() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["fkg", "--potential", "P2", "--param", "-0.8"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let checks = rows(&dir.path().join("checks.csv"));
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|r| r[5] == "not-applicable"));
}

#[test]
fn configuration_errors_exit_two_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("never");
    let out = run(&["solve", "--potential", "P9"], &target);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("P9") || String::from_utf8_lossy(&out.stderr).contains("p9"));
    assert!(!target.exists());

    let out = run(&["solve", "--tol", "-1"], &target);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["markov", "--potential", "P1"], &target);
    assert_eq!(out.status.code(), Some(2));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[grid]\nsizes = 10\n").unwrap();
    let out = run(&["solve", "--config", cfg.to_str().unwrap()], &target);
    assert_eq!(out.status.code(), Some(2));

    fs::write(&cfg, "[spec]\nbudget = 100\n").unwrap();
    let out = run(&["spec-check", "--config", cfg.to_str().unwrap()], &target);
    assert_eq!(out.status.code(), Some(2));
    assert!(!target.exists());
}

#[test]
fn failing_verdicts_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    fs::write(&cfg, "[tolerances]\nzero_temperature = 1e-9\n").unwrap();
    let out = run(&["zerotemp", "--potential", "P1", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(rows(&dir.path().join("checks.csv")).iter().any(|r| r[5] == "fail"));
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = run(&["fkg", "--seed", "11"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["checks.csv", "scalars.csv", "fkg.csv"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn digest_tracks_configuration_not_output_location() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    run(&["solve", "--potential", "P1"], a.path());
    run(&["solve", "--potential", "P1"], b.path());
    run(&["solve", "--potential", "P1", "--tol", "1e-11"], c.path());
    let da = scalar(a.path(), "config_digest");
    assert_eq!(da.len(), 64);
    assert_eq!(da, scalar(b.path(), "config_digest"));
    assert_ne!(da, scalar(c.path(), "config_digest"));
}

#[test]
fn environment_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .arg("solve")
        .env_clear()
        .env("THERMOFORM_OUT", dir.path())
        .env("THERMOFORM_POTENTIAL", "P2")
        .env("THERMOFORM_PARAMS", "0.3")
        .env("THERMOFORM_GRID_SIZE", "30")
        .env("THERMOFORM_DETERMINISTIC", "true")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(scalar(dir.path(), "potential"), "P2(J=0.3)");
    assert_eq!(scalar(dir.path(), "grid_size"), "30");
    assert!(rows(&dir.path().join("scalars.csv")).iter().all(|r| r[0] != "wall_time_s"));
}
