//! Machine-readable result envelopes and CSV series.
//!
//! CSV layout: first column `t`, remaining columns grid samples in index
//! order with the header row carrying the x coordinates (directly plottable).
//! Floats print with 17 significant digits so determinism checks are
//! meaningful byte-for-byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use dequant_core::{EnergySample, Grid, KineticReport, TrajectoryRecord};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Envelope common to every command.
#[derive(Debug, Serialize)]
pub struct ResultEnvelope<T: Serialize> {
    pub command: String,
    pub config: RunConfig,
    #[serde(flatten)]
    pub payload: T,
    pub exit_status: i32,
}

#[derive(Debug, Serialize)]
pub struct KineticSummary {
    pub t_quantum: f64,
    pub t_deformed: f64,
    pub t_critical: f64,
    pub fisher: f64,
    pub identity_residual: f64,
    pub identity_tolerance: f64,
    pub form_residual: f64,
    pub form_tolerance: f64,
    pub residuals_pass: bool,
}

impl KineticSummary {
    pub fn new(report: &KineticReport, identity_tolerance: f64, form_tolerance: f64) -> Self {
        let residuals_pass = report.identity_residual <= identity_tolerance
            && report.form_residual <= form_tolerance;
        KineticSummary {
            t_quantum: report.t_quantum,
            t_deformed: report.t_deformed,
            t_critical: report.t_critical,
            fisher: report.fisher,
            identity_residual: report.identity_residual,
            identity_tolerance,
            form_residual: report.form_residual,
            form_tolerance,
            residuals_pass,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MinimizerSummary {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub t_at_minimum: f64,
    pub rho_distance_to_closed_form: f64,
}

#[derive(Debug, Serialize)]
pub struct CausticSummary {
    pub time: f64,
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Serialize)]
pub struct EvolveSummary {
    pub mode: String,
    pub records: usize,
    pub t_final: f64,
    pub norm_initial: f64,
    pub norm_final: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub energy_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caustic: Option<CausticSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapSummary>,
    pub files: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct GapSummary {
    /// Kinetic-energy gap at t = 0 (equals `hbar^2 I / 8m`).
    pub delta_kinetic_initial: f64,
    pub l2_gap_final: f64,
    pub truncated: bool,
}

#[derive(Debug, Serialize)]
pub struct VerifySummary {
    pub seed: u64,
    pub cases: usize,
    pub all_passed: bool,
    pub families: Vec<FamilySummary>,
}

#[derive(Debug, Serialize)]
pub struct FamilySummary {
    pub name: String,
    pub cases: usize,
    pub worst_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn write_json<T: Serialize>(envelope: &ResultEnvelope<T>, out: Option<&Path>, name: &str) -> Result<String> {
    let text = serde_json::to_string_pretty(envelope)
        .map_err(|e| CliError::Io(format!("serializing {name}: {e}")))?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
        let path = dir.join(name);
        fs::write(&path, format!("{text}\n"))
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    }
    Ok(text)
}

/// Grid-valued time series: `t` column then one column per grid point.
pub fn write_field_series(
    dir: &Path,
    name: &str,
    grid: &Grid,
    times: &[f64],
    rows: &[Vec<f64>],
) -> Result<PathBuf> {
    let mut text = String::new();
    text.push('t');
    for &x in grid.points() {
        let _ = write!(text, ",{}", fmt_f64(x));
    }
    text.push('\n');
    for (t, row) in times.iter().zip(rows) {
        let _ = write!(text, "{}", fmt_f64(*t));
        for v in row {
            let _ = write!(text, ",{}", fmt_f64(*v));
        }
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}

/// Scalar time series with named columns.
pub fn write_scalar_series(
    dir: &Path,
    name: &str,
    header: &[&str],
    rows: &[Vec<f64>],
) -> Result<PathBuf> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        let cols: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        text.push_str(&cols.join(","));
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}

pub fn energy_rows(record: &TrajectoryRecord) -> Vec<Vec<f64>> {
    record
        .times
        .iter()
        .zip(&record.energies)
        .zip(&record.norms)
        .map(|((&t, e), &n)| vec![t, e.kinetic, e.potential, e.total, n])
        .collect()
}

pub fn energy_drift(energies: &[EnergySample]) -> f64 {
    let first = energies.first().map(|e| e.total).unwrap_or(0.0);
    energies
        .iter()
        .map(|e| (e.total - first).abs())
        .fold(0.0_f64, f64::max)
}
