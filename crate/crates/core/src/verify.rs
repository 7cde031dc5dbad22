//! Seeded randomized invariant suite over the deformation functionals.
//!
//! Seven families, each checked on freshly drawn smooth states and
//! deformation fields; the run is deterministic for a given seed and the
//! rendered report is byte-stable. States are positive Gaussian mixtures
//! with a smooth global phase (and optional integer winding), which keeps
//! densities node-free so every functional stays well-conditioned.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::deformation::{
    critical_deformation, fisher_information, functional_gradient, kinetic_deformed_direct,
    kinetic_deformed_expanded, kinetic_quantum, osmotic_momentum, DeformationField,
};
use crate::error::Result;
use crate::field::RealField;
use crate::grid::Grid;
use crate::state::{default_rho_floor, PhysicalConstants, WaveFunction};

/// Suite parameters.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub seed: u64,
    pub cases: usize,
    pub grid: Arc<Grid>,
    pub constants: PhysicalConstants,
}

impl VerifyConfig {
    /// Reference scale: periodic grid of 512 points over a length-16 domain.
    pub fn with_defaults(seed: u64, cases: usize) -> Result<Self> {
        Ok(VerifyConfig {
            seed,
            cases,
            grid: Grid::periodic(-8.0, 8.0, 512)?,
            constants: PhysicalConstants::default(),
        })
    }
}

/// Fault injection for suite-sensitivity tests. `FlipCriticalSign` negates
/// the critical deformation before it is used, which must break the Fisher
/// identity family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    FlipCriticalSign,
}

/// Outcome of one invariant family.
#[derive(Debug, Clone)]
pub struct FamilyResult {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Full suite outcome.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub seed: u64,
    pub cases: usize,
    pub families: Vec<FamilyResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.families.iter().all(|f| f.passed)
    }

    /// Deterministic plain-text report; floats carry 17 significant digits.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "verify seed={} cases={}", self.seed, self.cases);
        let _ = writeln!(
            out,
            "{:<22} {:>6} {:>24} {:>12} {:>7}",
            "family", "cases", "worst_residual", "tolerance", "status"
        );
        for f in &self.families {
            let _ = writeln!(
                out,
                "{:<22} {:>6} {:>24.16e} {:>12.1e} {:>7}",
                f.name,
                f.cases,
                f.worst,
                f.tolerance,
                if f.passed { "PASS" } else { "FAIL" }
            );
        }
        let passed = self.families.iter().filter(|f| f.passed).count();
        let _ = writeln!(
            out,
            "overall: {} ({}/{} families)",
            if self.all_passed() { "PASS" } else { "FAIL" },
            passed,
            self.families.len()
        );
        out
    }
}

/// Random node-free state: positive Gaussian mixture times a smooth phase.
///
/// Component widths and centers keep the wavefunction (whose tails go like
/// `exp(-x^2/4 sigma^2)`, twice as wide as the density) below ~1e-9 at the
/// periodic seam, so spectral identities hold to their stated tolerances.
pub fn random_smooth_state(
    rng: &mut ChaCha8Rng,
    grid: &Arc<Grid>,
    constants: PhysicalConstants,
) -> WaveFunction {
    let l = grid.length();
    let center = 0.5 * (grid.x_min() + grid.x_max());
    let n_components = rng.gen_range(1..=3);
    let components: Vec<(f64, f64, f64)> = (0..n_components)
        .map(|_| {
            (
                rng.gen_range(0.5..1.5),
                center + rng.gen_range(-2.0..2.0),
                rng.gen_range(0.35..0.65),
            )
        })
        .collect();
    let n_modes = 3;
    let phase_coeffs: Vec<(f64, f64)> = (0..n_modes)
        .map(|_| (rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)))
        .collect();
    let winding = rng.gen_range(-2..=2) as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let psi = crate::field::ComplexField::from_fn(grid.clone(), |x| {
        let amp: f64 = components
            .iter()
            .map(|&(w, x0, sigma)| w * (-(x - x0) * (x - x0) / (4.0 * sigma * sigma)).exp())
            .sum();
        let mut phase = winding * two_pi * (x - grid.x_min()) / l;
        for (q, &(a, b)) in phase_coeffs.iter().enumerate() {
            let arg = two_pi * (q as f64 + 1.0) * x / l;
            phase += a * arg.sin() + b * arg.cos();
        }
        num_complex::Complex64::new(amp * phase.cos(), amp * phase.sin())
    })
    .expect("finite samples");
    WaveFunction::new(psi, constants)
        .expect("valid constants")
        .normalize()
        .expect("nonzero mixture")
}

/// Random smooth periodic field from a handful of low-wavenumber modes.
pub fn random_smooth_field(rng: &mut ChaCha8Rng, grid: &Arc<Grid>, amplitude: f64) -> RealField {
    let l = grid.length();
    let two_pi = 2.0 * std::f64::consts::PI;
    let coeffs: Vec<(f64, f64)> = (0..4)
        .map(|_| {
            (
                amplitude * rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..two_pi),
            )
        })
        .collect();
    let offset = amplitude * rng.gen_range(-0.5..0.5);
    RealField::from_fn(grid.clone(), |x| {
        let mut v = offset;
        for (q, &(a, p)) in coeffs.iter().enumerate() {
            v += a * (two_pi * (q as f64 + 1.0) * x / l + p).cos();
        }
        v
    })
    .expect("finite samples")
}

/// Normalize a direction to unit rho-weighted norm.
fn normalize_rho_weighted(rho: &RealField, field: &RealField) -> RealField {
    let norm_sq: f64 = rho
        .grid()
        .integrate_samples(
            &rho.values()
                .iter()
                .zip(field.values())
                .map(|(&r, &f)| r.max(0.0) * f * f)
                .collect::<Vec<_>>(),
        );
    let scale = 1.0 / norm_sq.sqrt().max(1e-300);
    field.map(|v| v * scale)
}

pub fn run_verify(config: &VerifyConfig) -> Result<VerifyReport> {
    run_verify_with(config, Fault::None)
}

/// Run all seven families. A fault, when injected, must surface as a FAIL in
/// the family it targets; the public CLI never injects one.
pub fn run_verify_with(config: &VerifyConfig, fault: Fault) -> Result<VerifyReport> {
    let grid = &config.grid;
    let constants = config.constants;
    let cases = config.cases.max(1);
    let hbar = constants.hbar;
    let mass = constants.mass;

    let critical_with_fault = |rho: &RealField, floor: f64| -> Result<DeformationField> {
        let u_c = critical_deformation(rho, constants, floor)?;
        Ok(match fault {
            Fault::None => u_c,
            Fault::FlipCriticalSign => {
                DeformationField::new(u_c.u().map(|v| -v), constants)?
            }
        })
    };

    let mut families = Vec::new();

    // MINIMUM PROPERTY: T_{uc + du} - T_uc = (1/2m) integrate(rho du^2) exactly
    {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x4d49_4e49);
        let mut worst = 0.0_f64;
        for _ in 0..cases {
            let wf = random_smooth_state(&mut rng, grid, constants);
            let rho = wf.density();
            let floor = default_rho_floor(&rho);
            let u_c = critical_with_fault(&rho, floor)?;
            let delta = normalize_rho_weighted(&rho, &random_smooth_field(&mut rng, grid, 1.0));
            let perturbed = DeformationField::new(
                u_c.u().zip_map(&delta, |a, b| a + b)?,
                constants,
            )?;
            let t_uc = kinetic_deformed_direct(&wf, &u_c)?;
            let t_pert = kinetic_deformed_direct(&wf, &perturbed)?;
            let quadratic = rho
                .grid()
                .integrate_samples(
                    &rho.values()
                        .iter()
                        .zip(delta.values())
                        .map(|(&r, &d)| r * d * d)
                        .collect::<Vec<_>>(),
                )
                / (2.0 * mass);
            let residual = ((t_pert - t_uc) - quadratic).abs() / quadratic.abs();
            worst = worst.max(residual);
        }
        families.push(FamilyResult {
            name: "MINIMUM_PROPERTY",
            cases,
            worst,
            tolerance: 1e-8,
            passed: worst <= 1e-8,
        });
    }

    // FISHER IDENTITY: T_uc = T - hbar^2 I / 8m
    {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x4649_5348);
        let mut worst = 0.0_f64;
        for _ in 0..cases {
            let wf = random_smooth_state(&mut rng, grid, constants);
            let rho = wf.density();
            let floor = default_rho_floor(&rho);
            let u_c = critical_with_fault(&rho, floor)?;
            let t = kinetic_quantum(&wf);
            let t_uc = kinetic_deformed_direct(&wf, &u_c)?;
            let fisher = fisher_information(&rho, floor);
            let residual = (t_uc - (t - hbar * hbar * fisher / (8.0 * mass))).abs() / (1.0 + t);
            worst = worst.max(residual);
        }
        families.push(FamilyResult {
            name: "FISHER_IDENTITY",
            cases,
            worst,
            tolerance: 1e-8,
            passed: worst <= 1e-8,
        });
    }

    // FORM EQUIVALENCE: direct vs expanded deformed kinetic term
    {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x464f_524d);
        let mut worst = 0.0_f64;
        for _ in 0..cases {
            let wf = random_smooth_state(&mut rng, grid, constants);
            let u = DeformationField::new(random_smooth_field(&mut rng, grid, 1.2), constants)?;
            let direct = kinetic_deformed_direct(&wf, &u)?;
            let expanded = kinetic_deformed_expanded(&wf, &u)?;
            let residual = (direct - expanded).abs() / (1.0 + direct.abs());
            worst = worst.max(residual);
        }
        families.push(FamilyResult {
            name: "FORM_EQUIVALENCE",
            cases,
            worst,
            tolerance: 1e-9,
            passed: worst <= 1e-9,
        });
    }

    // GRADIENT CONSISTENCY: functional gradient vs central differences
    {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x4752_4144);
        let mut worst = 0.0_f64;
        let eps = 1e-5;
        for _ in 0..cases {
            let wf = random_smooth_state(&mut rng, grid, constants);
            let u = random_smooth_field(&mut rng, grid, 0.9);
            let delta = random_smooth_field(&mut rng, grid, 1.0);
            let u_field = DeformationField::new(u.clone(), constants)?;
            let grad = functional_gradient(&wf, &u_field)?;
            let pairing: f64 = grid.integrate_samples(
                &grad
                    .values()
                    .iter()
                    .zip(delta.values())
                    .map(|(&g, &d)| g * d)
                    .collect::<Vec<_>>(),
            );
            let shifted = |s: f64| -> Result<f64> {
                let field = u.zip_map(&delta, |a, b| a + s * b)?;
                kinetic_deformed_direct(&wf, &DeformationField::new(field, constants)?)
            };
            let fd = (shifted(eps)? - shifted(-eps)?) / (2.0 * eps);
            let residual = (fd - pairing).abs() / (1.0 + pairing.abs());
            worst = worst.max(residual);
        }
        families.push(FamilyResult {
            name: "GRADIENT_CONSISTENCY",
            cases,
            worst,
            tolerance: 1e-6,
            passed: worst <= 1e-6,
        });
    }

    // NONNEGATIVITY: T_u >= T_uc >= 0
    {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x4e4f_4e4e);
        let mut worst = 0.0_f64;
        for _ in 0..cases {
            let wf = random_smooth_state(&mut rng, grid, constants);
            let rho = wf.density();
            let floor = default_rho_floor(&rho);
            let u_c = critical_with_fault(&rho, floor)?;
            let u = DeformationField::new(random_smooth_field(&mut rng, grid, 1.5), constants)?;
            let t = kinetic_quantum(&wf);
            let t_u = kinetic_deformed_direct(&wf, &u)?;
            let t_uc = kinetic_deformed_direct(&wf, &u_c)?;
            let violation = (t_uc - t_u).max(-t_uc).max(0.0) / (1.0 + t);
            worst = worst.max(violation);
        }
        families.push(FamilyResult {
            name: "NONNEGATIVITY",
            cases,
            worst,
            tolerance: 1e-10,
            passed: worst <= 1e-10,
        });
    }

    // SCALE COVARIANCE: with rho fixed and S/hbar fixed, hbar -> lambda hbar
    // scales u_c by lambda. The density (hence the Fisher information) is
    // untouched by construction, so the family measures the u_c scaling.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5343_414c);
        let mut worst = 0.0_f64;
        for _ in 0..cases {
            let wf = random_smooth_state(&mut rng, grid, constants);
            let rho = wf.density();
            let floor = default_rho_floor(&rho);
            let lambda = rng.gen_range(1.5..3.0);
            let scaled = PhysicalConstants::new(lambda * hbar, mass)?;
            let u_base = critical_deformation(&rho, constants, floor)?;
            let u_scaled = critical_deformation(&rho, scaled, floor)?;
            let u_scale_max = u_base.u().max_abs().max(1e-300);
            let u_residual = u_scaled
                .u()
                .values()
                .iter()
                .zip(u_base.u().values())
                .map(|(&s, &b)| (s - lambda * b).abs())
                .fold(0.0_f64, f64::max)
                / (lambda * u_scale_max);
            worst = worst.max(u_residual);
        }
        families.push(FamilyResult {
            name: "SCALE_COVARIANCE",
            cases,
            worst,
            tolerance: 1e-12,
            passed: worst <= 1e-12,
        });
    }

    // OSMOTIC IDENTITY: osmotic momentum + u_c = 0 pointwise
    {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x4f53_4d4f);
        let mut worst = 0.0_f64;
        for _ in 0..cases {
            let wf = random_smooth_state(&mut rng, grid, constants);
            let rho = wf.density();
            let floor = default_rho_floor(&rho);
            let u_c = critical_with_fault(&rho, floor)?;
            let osmotic = osmotic_momentum(&rho, constants, floor)?;
            let residual = osmotic
                .values()
                .iter()
                .zip(u_c.u().values())
                .map(|(&o, &u)| (o + u).abs())
                .fold(0.0_f64, f64::max);
            worst = worst.max(residual);
        }
        families.push(FamilyResult {
            name: "OSMOTIC_IDENTITY",
            cases,
            worst,
            tolerance: 1e-12,
            passed: worst <= 1e-12,
        });
    }

    Ok(VerifyReport {
        seed: config.seed,
        cases,
        families,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_is_deterministic() {
        let config = VerifyConfig::with_defaults(42, 8).unwrap();
        let a = run_verify(&config).unwrap();
        assert!(a.all_passed(), "report:\n{}", a.render());
        assert_eq!(a.families.len(), 7);
        let b = run_verify(&config).unwrap();
        assert_eq!(a.render(), b.render());
    }

    #[test]
    fn sign_fault_breaks_fisher_identity() {
        let config = VerifyConfig::with_defaults(42, 4).unwrap();
        let report = run_verify_with(&config, Fault::FlipCriticalSign).unwrap();
        let fisher = report
            .families
            .iter()
            .find(|f| f.name == "FISHER_IDENTITY")
            .unwrap();
        assert!(!fisher.passed);
    }
}
