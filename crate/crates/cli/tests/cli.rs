//! End-to-end tests of the command-line contract: exit codes, JSON payloads,
//! CSV layout, config diagnostics, and determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dequant"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

#[test]
fn report_plane_wave_has_expected_values() {
    let output = run(&[
        "report",
        "--config",
        repo_config("report_plane_wave.toml").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let json = stdout_json(&output);
    let kinetic = &json["kinetic"];
    assert!((kinetic["t_quantum"].as_f64().unwrap() - 0.5).abs() <= 1e-12);
    assert!(kinetic["fisher"].as_f64().unwrap().abs() <= 1e-12);
    assert!((kinetic["t_critical"].as_f64().unwrap() - 0.5).abs() <= 1e-12);
    assert_eq!(kinetic["residuals_pass"].as_bool(), Some(true));
}

#[test]
fn report_gaussian_has_expected_values() {
    let output = run(&[
        "report",
        "--config",
        repo_config("report_gaussian.toml").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let json = stdout_json(&output);
    let kinetic = &json["kinetic"];
    assert!((kinetic["t_quantum"].as_f64().unwrap() - 0.125).abs() <= 1e-10);
    assert!((kinetic["fisher"].as_f64().unwrap() - 1.0).abs() <= 1e-8);
    assert!(kinetic["t_critical"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn report_with_minimizer_trace() {
    let output = run(&[
        "report",
        "--config",
        repo_config("report_gaussian.toml").to_str().unwrap(),
        "--minimize",
    ]);
    assert_eq!(output.status.code(), Some(0));
    let json = stdout_json(&output);
    let min = &json["minimizer"];
    assert!(min["iterations"].as_u64().unwrap() > 0);
    assert!(min["rho_distance_to_closed_form"].as_f64().unwrap() <= 1e-5);
    assert!(min["t_at_minimum"].as_f64().unwrap().abs() <= 1e-7);
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let good = fs::read_to_string(repo_config("report_gaussian.toml")).unwrap();
    fs::write(&path, good.replace("sigma = 1.0", "sigma = -1.0")).unwrap();
    let output = run(&["report", "--config", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("sigma"), "stderr: {stderr}");
}

#[test]
fn unknown_field_is_rejected_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let good = fs::read_to_string(repo_config("report_gaussian.toml")).unwrap();
    fs::write(&path, format!("{good}\n[grid.extra]\nfoo = 1\n")).unwrap();
    let output = run(&["report", "--config", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn missing_sample_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        r#"
[grid]
x_min = -8.0
x_max = 8.0
n = 512
boundary = "periodic"

[state]
kind = "polar"
rho_file = "no_such_rho.txt"
s_file = "no_such_s.txt"
"#,
    )
    .unwrap();
    let output = run(&["report", "--config", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("does not exist"), "stderr: {stderr}");
}

#[test]
fn rough_deformation_file_fails_form_tolerance() {
    // per-point noise aliases badly, so the direct and expanded deformed
    // kinetic terms disagree and the report exits 4
    let dir = tempfile::tempdir().unwrap();
    let u_path = dir.path().join("rough_u.txt");
    let n = 512;
    let dx = 16.0 / n as f64;
    let mut text = String::new();
    for i in 0..n {
        let x = -8.0 + i as f64 * dx;
        let noise = ((i as f64 * 12.9898).sin() * 43758.5453).fract();
        text.push_str(&format!("{x:.16e} {noise:.16e}\n"));
    }
    fs::write(&u_path, text).unwrap();

    let config_path = dir.path().join("rough.toml");
    fs::write(
        &config_path,
        format!(
            r#"
[grid]
x_min = -8.0
x_max = 8.0
n = 512
boundary = "periodic"

[state]
kind = "gaussian_packet"
x0 = 0.0
sigma = 1.0
k0 = 0.0

[deformation]
kind = "file"
file = "{}"
"#,
            u_path.display()
        ),
    )
    .unwrap();
    let output = run(&["report", "--config", config_path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(4));
    let json = stdout_json(&output);
    assert_eq!(json["kinetic"]["residuals_pass"].as_bool(), Some(false));
    assert_eq!(json["exit_status"].as_i64(), Some(4));
}

#[test]
fn evolve_refuses_oversized_dt_and_prints_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fast.toml");
    let good = fs::read_to_string(repo_config("evolve_gap_free.toml")).unwrap();
    fs::write(&path, good.replace("dt = 8e-5", "dt = 1e-3")).unwrap();
    let output = run(&[
        "evolve",
        "--config",
        path.to_str().unwrap(),
        "--mode",
        "quantum",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("split-step bound"), "stderr: {stderr}");
    assert!(stderr.contains("advective bound"), "stderr: {stderr}");
}

#[test]
fn classical_caustic_run_is_flagged_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&[
        "evolve",
        "--config",
        repo_config("evolve_classical_caustic.toml").to_str().unwrap(),
        "--mode",
        "classical",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let json = stdout_json(&output);
    let caustic_time = json["caustic"]["time"].as_f64().expect("caustic flagged");
    assert!(
        (caustic_time - 1.0).abs() <= 0.1,
        "caustic at {caustic_time}"
    );
}

#[test]
fn harmonic_ground_state_energy_column_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&[
        "evolve",
        "--config",
        repo_config("evolve_quantum_harmonic.toml").to_str().unwrap(),
        "--mode",
        "quantum",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let energies = fs::read_to_string(dir.path().join("energies.csv")).unwrap();
    let mut lines = energies.lines();
    assert_eq!(lines.next(), Some("t,kinetic,potential,total,norm"));
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!((cols[3] - 0.5).abs() <= 1e-8, "total {} at t {}", cols[3], cols[0]);
        assert!((cols[4] - 1.0).abs() <= 1e-10, "norm {} at t {}", cols[4], cols[0]);
    }
}

#[test]
fn gap_run_reports_initial_kinetic_gap() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&[
        "evolve",
        "--config",
        repo_config("evolve_gap_free.toml").to_str().unwrap(),
        "--mode",
        "gap",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let json = stdout_json(&output);
    let dt0 = json["gap"]["delta_kinetic_initial"].as_f64().unwrap();
    assert!((dt0 - 0.125).abs() <= 1e-8, "delta T(0) = {dt0}");
    // csv layout: header carries the x coordinates
    let gap_csv = fs::read_to_string(dir.path().join("gap.csv")).unwrap();
    assert!(gap_csv.starts_with("t,l2_gap,delta_kinetic\n"));
    let rho_csv = fs::read_to_string(dir.path().join("quantum_rho.csv")).unwrap();
    let header = rho_csv.lines().next().unwrap();
    assert!(header.starts_with("t,-8.0000000000000000e0,"));
    assert_eq!(header.split(',').count(), 513);
}

#[test]
fn identical_config_and_seed_give_byte_identical_outputs() {
    let run_once = |dir: &Path| {
        let output = run(&[
            "evolve",
            "--config",
            repo_config("evolve_classical_caustic.toml").to_str().unwrap(),
            "--mode",
            "classical",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(output.status.code(), Some(0));
        output.stdout
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let stdout_a = run_once(dir_a.path());
    let stdout_b = run_once(dir_b.path());
    assert_eq!(stdout_a, stdout_b);
    for name in ["rho.csv", "s.csv", "energies.csv"] {
        let a = fs::read(dir_a.path().join(name)).unwrap();
        let b = fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn echoed_config_reparses_to_an_equivalent_run() {
    // convert the JSON echo back to TOML, rerun, and demand identical results
    let first = run(&[
        "report",
        "--config",
        repo_config("report_gaussian.toml").to_str().unwrap(),
    ]);
    assert_eq!(first.status.code(), Some(0));
    let json = stdout_json(&first);
    let config_value = json["config"].clone();
    let toml_text = toml::to_string(&config_value).expect("echo serializes to TOML");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("echo.toml");
    fs::write(&path, toml_text).unwrap();
    let second = run(&["report", "--config", path.to_str().unwrap()]);
    assert_eq!(second.status.code(), Some(0));
    let json_b = stdout_json(&second);
    assert_eq!(json["kinetic"], json_b["kinetic"]);
    assert_eq!(json["config"], json_b["config"]);
}
