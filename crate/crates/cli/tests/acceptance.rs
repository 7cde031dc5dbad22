//! Acceptance criterion 13: determinism of the verify command. The remaining
//! criteria live in the core crate's acceptance suite.

use std::process::{Command, Output};

fn run_verify(out: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dequant"))
        .args(["verify", "--seed", "42", "--cases", "50", "--out"])
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn criterion_13_determinism() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = run_verify(dir_a.path());
    let b = run_verify(dir_b.path());

    let exit_ok = a.status.code() == Some(0) && b.status.code() == Some(0);
    let stdout_identical = a.stdout == b.stdout;
    let report_a = std::fs::read(dir_a.path().join("verify_report.txt")).unwrap();
    let report_b = std::fs::read(dir_b.path().join("verify_report.txt")).unwrap();
    let files_identical = report_a == report_b;

    let text = String::from_utf8_lossy(&a.stdout);
    let families = text
        .lines()
        .filter(|l| l.ends_with("PASS") || l.ends_with("FAIL"))
        .count();
    let seven_families = families == 7;
    let all_pass = text.contains("overall: PASS (7/7 families)");

    let passed = exit_ok && stdout_identical && files_identical && seven_families && all_pass;
    println!(
        "criterion 13 DETERMINISM              {} (byte-identical: stdout {}, report file {}; {} families, exit codes {:?}/{:?})",
        if passed { "PASS" } else { "FAIL" },
        stdout_identical,
        files_identical,
        families,
        a.status.code(),
        b.status.code()
    );
    assert!(passed);
}
