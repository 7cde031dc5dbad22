//! Command drivers: report, evolve, verify.

use std::path::{Path, PathBuf};


use dequant_core::verify::{run_verify, VerifyConfig};
use dequant_core::{
    dequantization_gap, evolve_classical, evolve_deformed_fixed_u, evolve_schrodinger,
    kinetic_report, minimize_deformation, rho_weighted_distance, Boundary, CoreError,
    DeformationField, Snapshot, TrajectoryRecord,
};

use crate::config::{boundary_of, dt_bounds, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{
    energy_drift, energy_rows, fmt_f64, write_field_series, write_json, write_scalar_series,
    CausticSummary, EvolveSummary, FamilySummary, GapSummary, KineticSummary, MinimizerSummary,
    ResultEnvelope, VerifySummary,
};

fn map_core(e: CoreError) -> CliError {
    match e {
        CoreError::NanAtStep { .. } => CliError::Numerical(e.to_string()),
        CoreError::MaxIterExceeded { .. } => CliError::Numerical(e.to_string()),
        CoreError::DtTooLarge { .. } | CoreError::ZeroDt => CliError::Config(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

pub fn cmd_report(config_path: &Path, out: Option<&Path>, minimize: bool) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let grid = config.build_grid()?;
    let constants = config.build_constants()?;
    let (wf, _) = config.build_state(&grid, constants)?;
    let rho = wf.density();
    let floor = config.rho_floor_abs(&rho);
    let u_opt = config.build_deformation(&grid, constants, &wf, floor)?;

    let report = kinetic_report(&wf, u_opt.as_ref(), floor).map_err(map_core)?;
    let identity_tolerance = 1e-8 * (1.0 + report.t_quantum);
    let form_tolerance = match boundary_of(&config) {
        Boundary::Periodic => 1e-9 * (1.0 + report.t_deformed.abs()),
        // integration by parts picks up boundary terms on dirichlet grids
        Boundary::Dirichlet => 1e-6 * (1.0 + report.t_deformed.abs()),
    };
    let kinetic = KineticSummary::new(&report, identity_tolerance, form_tolerance);
    let residuals_pass = kinetic.residuals_pass;

    let minimizer = if minimize {
        let u0 = u_opt
            .clone()
            .unwrap_or_else(|| DeformationField::zeros(grid.clone(), constants));
        let min = minimize_deformation(
            &wf,
            &u0,
            config.tolerances.minimizer_tol,
            config.tolerances.max_iter,
        )
        .map_err(map_core)?;
        let u_c = dequant_core::critical_deformation(&rho, constants, floor).map_err(map_core)?;
        Some(MinimizerSummary {
            iterations: min.iterations,
            gradient_norm: min.gradient_norm,
            t_at_minimum: min.report.t_deformed,
            rho_distance_to_closed_form: rho_weighted_distance(
                &rho,
                min.deformation.u(),
                u_c.u(),
            ),
        })
    } else {
        None
    };

    #[derive(serde::Serialize)]
    struct ReportPayload {
        kinetic: KineticSummary,
        #[serde(skip_serializing_if = "Option::is_none")]
        minimizer: Option<MinimizerSummary>,
    }

    let envelope = ResultEnvelope {
        command: "report".to_string(),
        config,
        payload: ReportPayload { kinetic, minimizer },
        exit_status: if residuals_pass { 0 } else { 4 },
    };
    let text = write_json(&envelope, out, "report.json")?;
    println!("{text}");
    if residuals_pass {
        Ok(())
    } else {
        Err(CliError::Tolerance(format!(
            "identity residual {} (tolerance {}) / form residual {} (tolerance {})",
            fmt_f64(report.identity_residual),
            fmt_f64(identity_tolerance),
            fmt_f64(report.form_residual),
            fmt_f64(form_tolerance),
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvolveMode {
    Quantum,
    Classical,
    Deformed,
    Gap,
}

impl EvolveMode {
    fn name(self) -> &'static str {
        match self {
            EvolveMode::Quantum => "quantum",
            EvolveMode::Classical => "classical",
            EvolveMode::Deformed => "deformed",
            EvolveMode::Gap => "gap",
        }
    }
}

fn wave_rows(record: &TrajectoryRecord) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut re = Vec::new();
    let mut im = Vec::new();
    let mut rho = Vec::new();
    for snap in &record.snapshots {
        match snap {
            Snapshot::Wave(wf) => {
                re.push(wf.psi().values().iter().map(|c| c.re).collect());
                im.push(wf.psi().values().iter().map(|c| c.im).collect());
                rho.push(wf.density().values().to_vec());
            }
            Snapshot::Ensemble(_) => unreachable!("wave run records wavefunctions"),
        }
    }
    (re, im, rho)
}

fn ensemble_rows(record: &TrajectoryRecord) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rho = Vec::new();
    let mut s = Vec::new();
    for snap in &record.snapshots {
        match snap {
            Snapshot::Ensemble(ens) => {
                rho.push(ens.rho().values().to_vec());
                s.push(ens.s().values().to_vec());
            }
            Snapshot::Wave(_) => unreachable!("classical run records ensembles"),
        }
    }
    (rho, s)
}

fn caustic_summary(record: &TrajectoryRecord) -> Option<CausticSummary> {
    record.halt.map(|h| CausticSummary {
        time: h.time,
        step: h.step,
        reason: format!("{:?}", h.reason),
    })
}

pub fn cmd_evolve(config_path: &Path, mode: EvolveMode, out: &Path) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let evolution = config.evolution.ok_or_else(|| {
        CliError::Config("evolve requires an [evolution] section (dt, n_steps)".into())
    })?;
    let grid = config.build_grid()?;
    if boundary_of(&config) != Boundary::Periodic {
        return Err(CliError::Config(
            "evolve requires a periodic grid".into(),
        ));
    }
    let constants = config.build_constants()?;
    let (wf, loaded_ensemble) = config.build_state(&grid, constants)?;
    let potential = config.build_potential(&grid)?;
    let rho = wf.density();
    let floor = config.rho_floor_abs(&rho);

    // refuse runs that violate the dt guidance, printing the computed bounds
    let bounds = dt_bounds(&grid, constants, &wf);
    let dt = evolution.dt;
    let quantum_bound_applies = matches!(
        mode,
        EvolveMode::Quantum | EvolveMode::Deformed | EvolveMode::Gap
    );
    let classical_bound_applies = matches!(mode, EvolveMode::Classical | EvolveMode::Gap);
    if quantum_bound_applies && dt > bounds.quantum {
        return Err(CliError::Config(format!(
            "dt = {} violates the split-step bound {} (classical advective bound: {})",
            fmt_f64(dt),
            fmt_f64(bounds.quantum),
            fmt_f64(bounds.classical),
        )));
    }
    if classical_bound_applies && dt > bounds.classical {
        return Err(CliError::Config(format!(
            "dt = {} violates the classical advective bound {} (split-step bound: {})",
            fmt_f64(dt),
            fmt_f64(bounds.classical),
            fmt_f64(bounds.quantum),
        )));
    }

    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", out.display())))?;
    let mut files: Vec<PathBuf> = Vec::new();
    let energy_header = ["t", "kinetic", "potential", "total", "norm"];

    let classical_initial = || -> Result<dequant_core::ClassicalEnsemble> {
        match &loaded_ensemble {
            Some(ens) => Ok(ens.clone()),
            None => Ok(wf.polar_decompose(floor).map_err(map_core)?.ensemble),
        }
    };

    let summary = match mode {
        EvolveMode::Quantum | EvolveMode::Deformed => {
            let record = if mode == EvolveMode::Quantum {
                evolve_schrodinger(&wf, &potential, dt, evolution.n_steps, evolution.record_every)
                    .map_err(map_core)?
            } else {
                let u = config
                    .build_deformation(&grid, constants, &wf, floor)?
                    .unwrap_or_else(|| DeformationField::zeros(grid.clone(), constants));
                evolve_deformed_fixed_u(
                    &wf,
                    &potential,
                    &u,
                    dt,
                    evolution.n_steps,
                    evolution.record_every,
                )
                .map_err(map_core)?
            };
            let (re, im, rho_rows) = wave_rows(&record);
            files.push(write_field_series(out, "psi_re.csv", &grid, &record.times, &re)?);
            files.push(write_field_series(out, "psi_im.csv", &grid, &record.times, &im)?);
            files.push(write_field_series(out, "rho.csv", &grid, &record.times, &rho_rows)?);
            files.push(write_scalar_series(
                out,
                "energies.csv",
                &energy_header,
                &energy_rows(&record),
            )?);
            EvolveSummary {
                mode: mode.name().to_string(),
                records: record.len(),
                t_final: *record.times.last().unwrap(),
                norm_initial: record.norms[0],
                norm_final: *record.norms.last().unwrap(),
                energy_initial: record.energies[0].total,
                energy_final: record.energies.last().unwrap().total,
                energy_drift: energy_drift(&record.energies),
                caustic: None,
                gap: None,
                files: files.iter().map(|p| p.display().to_string()).collect(),
            }
        }
        EvolveMode::Classical => {
            let ens = classical_initial()?;
            let record = evolve_classical(
                &ens,
                &potential,
                dt,
                evolution.n_steps,
                evolution.record_every,
                None,
            )
            .map_err(map_core)?;
            let (rho_rows, s_rows) = ensemble_rows(&record);
            files.push(write_field_series(out, "rho.csv", &grid, &record.times, &rho_rows)?);
            files.push(write_field_series(out, "s.csv", &grid, &record.times, &s_rows)?);
            files.push(write_scalar_series(
                out,
                "energies.csv",
                &energy_header,
                &energy_rows(&record),
            )?);
            EvolveSummary {
                mode: mode.name().to_string(),
                records: record.len(),
                t_final: *record.times.last().unwrap(),
                norm_initial: record.norms[0],
                norm_final: *record.norms.last().unwrap(),
                energy_initial: record.energies[0].total,
                energy_final: record.energies.last().unwrap().total,
                energy_drift: energy_drift(&record.energies),
                caustic: caustic_summary(&record),
                gap: None,
                files: files.iter().map(|p| p.display().to_string()).collect(),
            }
        }
        EvolveMode::Gap => {
            let gap = dequantization_gap(
                &wf,
                &potential,
                dt,
                evolution.n_steps,
                evolution.record_every,
                floor,
            )
            .map_err(map_core)?;
            let gap_rows: Vec<Vec<f64>> = gap
                .points
                .iter()
                .map(|p| vec![p.t, p.l2_gap, p.delta_kinetic])
                .collect();
            files.push(write_scalar_series(
                out,
                "gap.csv",
                &["t", "l2_gap", "delta_kinetic"],
                &gap_rows,
            )?);
            let (_, _, q_rho) = wave_rows(&gap.quantum);
            files.push(write_field_series(
                out,
                "quantum_rho.csv",
                &grid,
                &gap.quantum.times,
                &q_rho,
            )?);
            let (c_rho, _) = ensemble_rows(&gap.classical);
            files.push(write_field_series(
                out,
                "classical_rho.csv",
                &grid,
                &gap.classical.times,
                &c_rho,
            )?);
            files.push(write_scalar_series(
                out,
                "energies_quantum.csv",
                &energy_header,
                &energy_rows(&gap.quantum),
            )?);
            files.push(write_scalar_series(
                out,
                "energies_classical.csv",
                &energy_header,
                &energy_rows(&gap.classical),
            )?);
            EvolveSummary {
                mode: mode.name().to_string(),
                records: gap.points.len(),
                t_final: gap.points.last().map(|p| p.t).unwrap_or(0.0),
                norm_initial: gap.quantum.norms[0],
                norm_final: *gap.quantum.norms.last().unwrap(),
                energy_initial: gap.quantum.energies[0].total,
                energy_final: gap.quantum.energies.last().unwrap().total,
                energy_drift: energy_drift(&gap.quantum.energies),
                caustic: caustic_summary(&gap.classical),
                gap: Some(GapSummary {
                    delta_kinetic_initial: gap.points.first().map(|p| p.delta_kinetic).unwrap_or(0.0),
                    l2_gap_final: gap.points.last().map(|p| p.l2_gap).unwrap_or(0.0),
                    truncated: gap.truncated.is_some(),
                }),
                files: files.iter().map(|p| p.display().to_string()).collect(),
            }
        }
    };

    let envelope = ResultEnvelope {
        command: format!("evolve --mode {}", mode.name()),
        config,
        payload: summary,
        exit_status: 0,
    };
    let text = write_json(&envelope, Some(out), "summary.json")?;
    println!("{text}");
    Ok(())
}

pub fn cmd_verify(
    seed: u64,
    cases: usize,
    config_path: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let verify_config = match config_path {
        Some(path) => {
            let config = RunConfig::load(path)?;
            let grid = config.build_grid()?;
            let constants = config.build_constants()?;
            VerifyConfig {
                seed,
                cases,
                grid,
                constants,
            }
        }
        None => VerifyConfig::with_defaults(seed, cases)
            .map_err(|e| CliError::Config(e.to_string()))?,
    };
    let report = run_verify(&verify_config).map_err(map_core)?;
    let rendered = report.render();
    print!("{rendered}");

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
        let path = dir.join("verify_report.txt");
        std::fs::write(&path, &rendered)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;

        #[derive(serde::Serialize)]
        struct VerifyEnvelope {
            command: String,
            summary: VerifySummary,
            exit_status: i32,
        }
        let summary = VerifySummary {
            seed: report.seed,
            cases: report.cases,
            all_passed: report.all_passed(),
            families: report
                .families
                .iter()
                .map(|f| FamilySummary {
                    name: f.name.to_string(),
                    cases: f.cases,
                    worst_residual: f.worst,
                    tolerance: f.tolerance,
                    passed: f.passed,
                })
                .collect(),
        };
        let envelope = VerifyEnvelope {
            command: "verify".to_string(),
            exit_status: if report.all_passed() { 0 } else { 4 },
            summary,
        };
        let text = serde_json::to_string_pretty(&envelope)
            .map_err(|e| CliError::Io(format!("serializing verify.json: {e}")))?;
        let path = dir.join("verify.json");
        std::fs::write(&path, format!("{text}\n"))
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    }

    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .families
            .iter()
            .filter(|f| !f.passed)
            .map(|f| f.name)
            .collect();
        Err(CliError::Tolerance(format!(
            "invariant families failed: {}",
            failed.join(", ")
        )))
    }
}
