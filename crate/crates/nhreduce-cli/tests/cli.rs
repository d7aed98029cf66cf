use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nhreduce(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhreduce"))
        .args(args)
        .arg("--output")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn check<'a>(rep: &'a Value, name: &str) -> &'a Value {
    rep["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["check"] == name)
        .unwrap()
}

#[test]
fn particle_simulation_conserves_gauge_momentum() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhreduce(&["simulate", "--system", "particle"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("particle_trajectory.csv"));
    assert_eq!(header.first().unwrap(), "t");
    assert_eq!(header.last().unwrap(), "constraint_residual");
    let j = header.iter().position(|h| h == "J_1").unwrap();
    let j0 = rows[0][j];
    assert!(rows.iter().all(|r| (r[j] - j0).abs() <= 1e-8));
    assert_eq!(rows.last().unwrap()[0], 10.0);
    let summary = report(&dir.path().join("particle_summary.json"));
    assert_eq!(summary["pass"], true);
}

#[test]
fn floats_are_written_with_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhreduce(&["simulate", "--system", "particle", "--t-final", "0.1"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("particle_trajectory.csv")).unwrap();
    let field = text.lines().nth(1).unwrap().split(',').nth(2).unwrap();
    let mantissa = field.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{field}");
}

#[test]
fn zero_duration_gives_a_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhreduce(&["simulate", "--system", "snakeboard", "--t-final", "0"], dir.path());
    assert!(out.status.success());
    let (_, rows) = read_csv(&dir.path().join("snakeboard_trajectory.csv"));
    assert_eq!(rows.len(), 1);
}

#[test]
fn tight_drift_tolerance_fails_and_names_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhreduce(&["simulate", "--system", "snakeboard", "--tolerance", "1e-12"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("drift of H"), "{stderr}");
    let summary = report(&dir.path().join("snakeboard_summary.json"));
    assert_eq!(summary["pass"], false);
}

#[test]
fn ball_verification_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhreduce(
        &["verify", "--system", "chaplygin_ball", "--level", "0.7", "--samples", "8"],
        dir.path(),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("omega_mu"));
    let rep = report(&dir.path().join("chaplygin_ball_verify.json"));
    assert_eq!(rep["pass"], true);
    let w = check(&rep, "omega_mu");
    assert_eq!(w["samples"], 8);
    assert!(w["max_residual"].as_f64().unwrap() <= w["tolerance"].as_f64().unwrap());
}

#[test]
fn particle_gauge_form_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhreduce(&["verify", "--system", "particle", "--checks", "b_form"], dir.path());
    assert!(out.status.success());
    let rep = report(&dir.path().join("particle_verify.json"));
    assert!(check(&rep, "b_form")["max_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn omitting_gauge_terms_breaks_basicness_for_the_ball() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhreduce(
        &["verify", "--system", "chaplygin_ball", "--checks", "basic", "--omit-gauge", "--samples", "5"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let rep = report(&dir.path().join("chaplygin_ball_verify.json"));
    assert_eq!(check(&rep, "basic")["pass"], false);
}

#[test]
fn verification_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["verify", "--system", "snakeboard", "--seed", "11", "--samples", "4"];
    assert!(nhreduce(&args, a.path()).status.success());
    assert!(nhreduce(&args, b.path()).status.success());
    let ra = std::fs::read(a.path().join("snakeboard_verify.json")).unwrap();
    let rb = std::fs::read(b.path().join("snakeboard_verify.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["verify", "--system", "unicycle"],
        vec!["verify", "--system", "particle", "--level", "1,2"],
        vec!["verify", "--system", "particle", "--checks", "nothing"],
        vec!["simulate", "--system", "particle", "--dt", "-1"],
        vec!["momenta", "--system", "chaplygin_ball"],
        vec!["simulate"],
    ] {
        assert_eq!(nhreduce(&args, dir.path()).status.code(), Some(2), "{args:?}");
    }
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "system = \"particle\"\n[parameters]\nradius = 2.0\n").unwrap();
    let out = nhreduce(&["simulate", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/snakeboard.toml");
    let out = nhreduce(
        &["simulate", "--config", cfg.to_str().unwrap(), "--t-final", "0.5"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("snakeboard_trajectory.csv"));
    let phi = header.iter().position(|h| h == "q_5").unwrap();
    assert_eq!(rows[0][phi], 1.2);
    let summary = report(&dir.path().join("snakeboard_summary.json"));
    assert_eq!(summary["seed"], 7);
}

#[test]
fn reduce_tabulates_the_leaf_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhreduce(&["reduce", "--system", "snakeboard", "--points", "7"], dir.path());
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("snakeboard_omega_mu.csv"));
    assert_eq!(rows.len(), 7);
    let w = header.iter().position(|h| h == "omega_12").unwrap();
    let b = header.iter().position(|h| h == "B_12").unwrap();
    for r in &rows {
        assert!((r[w] - 1.0).abs() < 1e-7);
        assert!(r[b].abs() < 1e-12);
    }
}

#[test]
fn momenta_tabulates_the_snakeboard_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhreduce(&["momenta", "--system", "snakeboard", "--points", "9"], dir.path());
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("snakeboard_momenta.csv"));
    let f22 = header.iter().position(|h| h == "F_22").unwrap();
    let f11 = header.iter().position(|h| h == "F_11").unwrap();
    for r in &rows {
        assert!((r[f22] - 1.0).abs() < 1e-10);
    }
    // F_11 = E(phi) peaks at phi = pi / 2
    let mid = &rows[4];
    assert!((mid[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    assert!((mid[f11] - 1.0).abs() < 1e-10);
}
