//! Momentum deformation: the deformed kinetic functional, its gradient,
//! closed-form and variational minimization, Fisher information, and the
//! classical momentum.
//!
//! The deformed momentum acts as `P_u psi = (-i hbar grad - i u) psi` with a
//! real deformation field `u`. The induced kinetic functional
//! `T_u = (1/2m) integrate(|P_u psi|^2)` is exactly quadratic in `u` with
//! pointwise curvature `rho/m`; its unique minimizer (in the rho-weighted
//! sense) is `u_c = -(hbar/2) grad(rho)/rho`, where the functional takes the
//! value `T - (hbar^2/8m) I` with `I` the Fisher information of the density.
//! [`minimize_deformation`] recovers that minimum numerically without ever
//! forming the closed-form expression, as an independent check.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::field::{ComplexField, RealField};
use crate::state::{
    default_rho_floor, interpolate_masked, polar_wave_samples, ClassicalEnsemble,
    PhysicalConstants, WaveFunction,
};

/// Real momentum-deformation field plus constants.
#[derive(Debug, Clone)]
pub struct DeformationField {
    u: RealField,
    constants: PhysicalConstants,
}

impl DeformationField {
    pub fn new(u: RealField, constants: PhysicalConstants) -> Result<Self> {
        PhysicalConstants::new(constants.hbar, constants.mass)?;
        Ok(DeformationField { u, constants })
    }

    pub fn zeros(grid: std::sync::Arc<crate::grid::Grid>, constants: PhysicalConstants) -> Self {
        DeformationField {
            u: RealField::zeros(grid),
            constants,
        }
    }

    pub fn constant(
        grid: std::sync::Arc<crate::grid::Grid>,
        constants: PhysicalConstants,
        c: f64,
    ) -> Result<Self> {
        Ok(DeformationField {
            u: RealField::constant(grid, c)?,
            constants,
        })
    }

    pub fn u(&self) -> &RealField {
        &self.u
    }

    pub fn grid(&self) -> &std::sync::Arc<crate::grid::Grid> {
        self.u.grid()
    }

    pub fn constants(&self) -> PhysicalConstants {
        self.constants
    }
}

/// Kinetic functionals of one state plus the residuals of the identities
/// relating them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticReport {
    /// Quantum kinetic term `T`.
    pub t_quantum: f64,
    /// Deformed kinetic term `T_u` at the reported deformation.
    pub t_deformed: f64,
    /// Deformed kinetic term at the closed-form critical deformation.
    pub t_critical: f64,
    /// Fisher information of the density.
    pub fisher: f64,
    /// `|T_uc - (T - hbar^2 I / 8m)|`.
    pub identity_residual: f64,
    /// `|T_u(direct) - T_u(expanded)|` at the reported deformation.
    pub form_residual: f64,
}

/// Result of the variational minimization.
#[derive(Debug, Clone)]
pub struct Minimization {
    pub deformation: DeformationField,
    pub report: KineticReport,
    pub iterations: usize,
    pub gradient_norm: f64,
}

fn check_pair(wf: &WaveFunction, u: &DeformationField) -> Result<()> {
    if !wf.grid().same_mesh(u.grid()) {
        return Err(CoreError::GridMismatch);
    }
    if wf.constants() != u.constants() {
        return Err(CoreError::ConstantsMismatch);
    }
    Ok(())
}

/// `P_u psi = -i hbar grad(psi) - i u psi`.
///
/// With `u = 0` this is the quantum momentum operator applied to `psi`.
pub fn apply_deformed_momentum(wf: &WaveFunction, u: &DeformationField) -> Result<ComplexField> {
    check_pair(wf, u)?;
    let hbar = wf.constants().hbar;
    let dpsi = wf.psi().derivative();
    let values: Vec<Complex64> = wf
        .psi()
        .values()
        .iter()
        .zip(dpsi.values())
        .zip(u.u().values())
        .map(|((&p, &dp), &uv)| {
            let grad_part = Complex64::new(0.0, -hbar) * dp;
            let deform_part = Complex64::new(0.0, -uv) * p;
            grad_part + deform_part
        })
        .collect();
    Ok(ComplexField::new(wf.grid().clone(), values)?)
}

/// Adjoint `P_u^dag psi = -i hbar grad(psi) + i u psi`.
pub fn adjoint_deformed_momentum(wf: &WaveFunction, u: &DeformationField) -> Result<ComplexField> {
    check_pair(wf, u)?;
    let hbar = wf.constants().hbar;
    let dpsi = wf.psi().derivative();
    let values: Vec<Complex64> = wf
        .psi()
        .values()
        .iter()
        .zip(dpsi.values())
        .zip(u.u().values())
        .map(|((&p, &dp), &uv)| {
            let grad_part = Complex64::new(0.0, -hbar) * dp;
            let deform_part = Complex64::new(0.0, uv) * p;
            grad_part + deform_part
        })
        .collect();
    Ok(ComplexField::new(wf.grid().clone(), values)?)
}

/// Quantum kinetic term `T = (1/2m) integrate(|P psi|^2)`.
pub fn kinetic_quantum(wf: &WaveFunction) -> f64 {
    let hbar = wf.constants().hbar;
    let mass = wf.constants().mass;
    let dpsi = wf.psi().derivative();
    let integrand: Vec<f64> = dpsi
        .values()
        .iter()
        .map(|dp| hbar * hbar * dp.norm_sqr())
        .collect();
    wf.grid().integrate_samples(&integrand) / (2.0 * mass)
}

/// Deformed kinetic term from its definition, `(1/2m) integrate(|P_u psi|^2)`.
pub fn kinetic_deformed_direct(wf: &WaveFunction, u: &DeformationField) -> Result<f64> {
    let pu = apply_deformed_momentum(wf, u)?;
    let mass = wf.constants().mass;
    let integrand: Vec<f64> = pu.values().iter().map(|c| c.norm_sqr()).collect();
    Ok(wf.grid().integrate_samples(&integrand) / (2.0 * mass))
}

/// Deformed kinetic term in expanded form,
/// `T + (1/2m) integrate(rho (-hbar grad(u) + u^2))`.
pub fn kinetic_deformed_expanded(wf: &WaveFunction, u: &DeformationField) -> Result<f64> {
    check_pair(wf, u)?;
    let hbar = wf.constants().hbar;
    let mass = wf.constants().mass;
    let rho = wf.density();
    let du = u.u().derivative();
    let integrand: Vec<f64> = rho
        .values()
        .iter()
        .zip(u.u().values())
        .zip(du.values())
        .map(|((&r, &uv), &duv)| r * (-hbar * duv + uv * uv))
        .collect();
    Ok(kinetic_quantum(wf) + wf.grid().integrate_samples(&integrand) / (2.0 * mass))
}

/// Functional gradient `delta T_u / delta u = (1/2m)(2 rho u + hbar grad(rho))`.
pub fn functional_gradient(wf: &WaveFunction, u: &DeformationField) -> Result<RealField> {
    check_pair(wf, u)?;
    let rho = wf.density();
    let drho = rho.derivative();
    Ok(gradient_field(
        rho.values(),
        drho.values(),
        u.u().values(),
        wf.constants(),
        wf.grid().clone(),
    ))
}

fn gradient_field(
    rho: &[f64],
    drho: &[f64],
    u: &[f64],
    constants: PhysicalConstants,
    grid: std::sync::Arc<crate::grid::Grid>,
) -> RealField {
    let hbar = constants.hbar;
    let inv_2m = 1.0 / (2.0 * constants.mass);
    let values: Vec<f64> = rho
        .iter()
        .zip(drho)
        .zip(u)
        .map(|((&r, &dr), &uv)| inv_2m * (2.0 * r * uv + hbar * dr))
        .collect();
    RealField::from_raw(grid, values)
}

/// Closed-form critical deformation `u_c = -(hbar/2) grad(rho)/max(rho, floor)`.
///
/// Below-floor points are filled by linear interpolation between flanking
/// valid points, mirroring the polar-decomposition mask policy.
pub fn critical_deformation(
    rho: &RealField,
    constants: PhysicalConstants,
    rho_floor: f64,
) -> Result<DeformationField> {
    let valid: Vec<bool> = rho.values().iter().map(|&r| r >= rho_floor).collect();
    let n_valid = valid.iter().filter(|&&v| v).count();
    if n_valid < 2 {
        return Err(CoreError::BelowResolutionFloor {
            valid: n_valid,
            n: rho.len(),
        });
    }
    let drho = rho.derivative();
    let coeff = -0.5 * constants.hbar;
    let mut values: Vec<f64> = rho
        .values()
        .iter()
        .zip(drho.values())
        .map(|(&r, &dr)| coeff * dr / r.max(rho_floor))
        .collect();
    interpolate_masked(&mut values, &valid);
    DeformationField::new(RealField::new(rho.grid().clone(), values)?, constants)
}

/// Nelson osmotic momentum `(hbar/2) grad(rho)/max(rho, floor)`.
///
/// Computed independently of [`critical_deformation`]; the two agree up to
/// sign pointwise.
pub fn osmotic_momentum(
    rho: &RealField,
    constants: PhysicalConstants,
    rho_floor: f64,
) -> Result<RealField> {
    let valid: Vec<bool> = rho.values().iter().map(|&r| r >= rho_floor).collect();
    let n_valid = valid.iter().filter(|&&v| v).count();
    if n_valid < 2 {
        return Err(CoreError::BelowResolutionFloor {
            valid: n_valid,
            n: rho.len(),
        });
    }
    let drho = rho.derivative();
    let coeff = 0.5 * constants.hbar;
    let mut values: Vec<f64> = rho
        .values()
        .iter()
        .zip(drho.values())
        .map(|(&r, &dr)| coeff * dr / r.max(rho_floor))
        .collect();
    interpolate_masked(&mut values, &valid);
    Ok(RealField::new(rho.grid().clone(), values)?)
}

/// Fisher information `I = integrate(grad(rho)^2 / max(rho, floor))`.
pub fn fisher_information(rho: &RealField, rho_floor: f64) -> f64 {
    let drho = rho.derivative();
    let integrand: Vec<f64> = rho
        .values()
        .iter()
        .zip(drho.values())
        .map(|(&r, &dr)| dr * dr / r.max(rho_floor))
        .collect();
    rho.grid().integrate_samples(&integrand)
}

/// Classical momentum field `grad(S)`, computed through the probability
/// current `hbar Im(psi* grad(psi)) / max(rho, floor)` so winding phases stay
/// periodic-safe. Below-floor points are interpolated as in the polar
/// decomposition.
pub fn classical_momentum_field(wf: &WaveFunction) -> Result<RealField> {
    let rho = wf.density();
    let rho_floor = default_rho_floor(&rho);
    let valid: Vec<bool> = rho.values().iter().map(|&r| r >= rho_floor).collect();
    let n_valid = valid.iter().filter(|&&v| v).count();
    if n_valid < 2 {
        return Err(CoreError::BelowResolutionFloor {
            valid: n_valid,
            n: rho.len(),
        });
    }
    let hbar = wf.constants().hbar;
    let dpsi = wf.psi().derivative();
    let mut values: Vec<f64> = wf
        .psi()
        .values()
        .iter()
        .zip(dpsi.values())
        .zip(rho.values())
        .map(|((&p, &dp), &r)| hbar * (p.conj() * dp).im / r.max(rho_floor))
        .collect();
    interpolate_masked(&mut values, &valid);
    Ok(RealField::new(wf.grid().clone(), values)?)
}

/// Mean kinetic energy of a classical ensemble,
/// `(1/2m) integrate(rho grad(S)^2)`.
///
/// `grad(S)` is evaluated through the current of the reconstructed
/// wavefunction, which keeps winding phases periodic-safe.
pub fn kinetic_classical(ens: &ClassicalEnsemble) -> f64 {
    let rho = ens.rho();
    let hbar = ens.constants().hbar;
    let mass = ens.constants().mass;
    let rho_floor = default_rho_floor(rho);
    let psi = polar_wave_samples(rho, ens.s(), hbar);
    let dpsi = psi.derivative();
    let integrand: Vec<f64> = psi
        .values()
        .iter()
        .zip(dpsi.values())
        .zip(rho.values())
        .map(|((&p, &dp), &r)| {
            let current = hbar * (p.conj() * dp).im;
            current * current / r.max(rho_floor)
        })
        .collect();
    rho.grid().integrate_samples(&integrand) / (2.0 * mass)
}

/// Evaluate `T`, `T_u`, `T_uc`, the Fisher information, and the identity
/// residuals. `u` defaults to the critical deformation.
pub fn kinetic_report(
    wf: &WaveFunction,
    u: Option<&DeformationField>,
    rho_floor: f64,
) -> Result<KineticReport> {
    let constants = wf.constants();
    let rho = wf.density();
    let t_quantum = kinetic_quantum(wf);
    let u_c = critical_deformation(&rho, constants, rho_floor)?;
    let fisher = fisher_information(&rho, rho_floor);
    let t_critical = kinetic_deformed_direct(wf, &u_c)?;
    let u_used = u.unwrap_or(&u_c);
    let t_deformed = kinetic_deformed_direct(wf, u_used)?;
    let t_expanded = kinetic_deformed_expanded(wf, u_used)?;
    let hbar = constants.hbar;
    let mass = constants.mass;
    let identity_residual = (t_critical - (t_quantum - hbar * hbar * fisher / (8.0 * mass))).abs();
    let form_residual = (t_deformed - t_expanded).abs();
    Ok(KineticReport {
        t_quantum,
        t_deformed,
        t_critical,
        fisher,
        identity_residual,
        form_residual,
    })
}

/// rho-weighted distance `sqrt(integrate(rho (a-b)^2))`.
pub fn rho_weighted_distance(rho: &RealField, a: &RealField, b: &RealField) -> f64 {
    let integrand: Vec<f64> = rho
        .values()
        .iter()
        .zip(a.values())
        .zip(b.values())
        .map(|((&r, &av), &bv)| r.max(0.0) * (av - bv) * (av - bv))
        .collect();
    rho.grid().integrate_samples(&integrand).sqrt()
}

/// Minimize `T_u` over `u` by conjugate-gradient descent on the functional
/// gradient, starting from `u0`.
///
/// The search never forms the closed-form minimizer and never divides by the
/// density: it only evaluates the functional gradient at trial fields and
/// takes quadrature inner products. Curvature along a direction comes from
/// the gradient difference `g(u + d) - g(u)`, which is exact because the
/// gradient is affine in `u`. Iteration continues while the gradient norm
/// keeps improving, and stops once it falls well below
/// `tol (1 + |T|) / L`; the final gradient norm above that target is an
/// error.
pub fn minimize_deformation(
    wf: &WaveFunction,
    u0: &DeformationField,
    tol: f64,
    max_iter: usize,
) -> Result<Minimization> {
    check_pair(wf, u0)?;
    let grid = wf.grid().clone();
    let constants = wf.constants();
    let n = grid.n();
    let weights = grid.weights().to_vec();
    let rho = wf.density();
    let drho = rho.derivative();
    let rho_v = rho.values().to_vec();
    let drho_v = drho.values().to_vec();

    let t_quantum = kinetic_quantum(wf);
    let target = tol * (1.0 + t_quantum.abs()) / grid.length();
    let deep_target = target * 1e-4;

    let inner = |a: &[f64], b: &[f64]| -> f64 {
        weights
            .iter()
            .zip(a)
            .zip(b)
            .map(|((&w, &x), &y)| w * x * y)
            .sum()
    };
    let grad = |u: &[f64]| -> Vec<f64> {
        let hbar = constants.hbar;
        let inv_2m = 1.0 / (2.0 * constants.mass);
        rho_v
            .iter()
            .zip(&drho_v)
            .zip(u)
            .map(|((&r, &dr), &uv)| inv_2m * (2.0 * r * uv + hbar * dr))
            .collect()
    };

    let mut u = u0.u().values().to_vec();
    let mut best_u = u.clone();
    let mut best_gnorm = f64::INFINITY;
    let mut stall = 0usize;
    let mut iterations = 0usize;

    // Conjugate directions with explicit re-conjugation: each new steepest
    // direction is H-orthogonalized against the stored history, which keeps
    // the exact-arithmetic finite-termination property through round-off.
    // History is cheap: directions and their curvature products, cleared
    // after a full basis.
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();

    loop {
        let g = grad(&u);
        let gnorm = inner(&g, &g).sqrt();
        if gnorm < 0.999 * best_gnorm {
            stall = 0;
        } else {
            stall += 1;
        }
        if gnorm < best_gnorm {
            best_gnorm = gnorm;
            best_u.copy_from_slice(&u);
        }
        if gnorm <= deep_target
            || (best_gnorm <= target && stall >= 30)
            || iterations >= max_iter
        {
            break;
        }

        let mut direction: Vec<f64> = g.iter().map(|v| -v).collect();
        for (d_prev, hd_prev, dhd_prev) in &history {
            let coeff = inner(&direction, hd_prev) / dhd_prev;
            for (dv, &pv) in direction.iter_mut().zip(d_prev) {
                *dv -= coeff * pv;
            }
        }
        // curvature along the direction from the affine gradient map
        let trial: Vec<f64> = u.iter().zip(&direction).map(|(&a, &b)| a + b).collect();
        let g_trial = grad(&trial);
        let hd: Vec<f64> = g_trial.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let dhd = inner(&direction, &hd);
        if dhd <= 0.0 {
            // no curvature left along this direction (density support exhausted)
            break;
        }
        let alpha = -inner(&g, &direction) / dhd;
        for (uv, &dv) in u.iter_mut().zip(&direction) {
            *uv += alpha * dv;
        }
        history.push((direction, hd, dhd));
        if history.len() >= n {
            history.clear();
        }
        iterations += 1;
    }

    let final_g = grad(&best_u);
    let gradient_norm = inner(&final_g, &final_g).sqrt();
    if gradient_norm > target {
        return Err(CoreError::MaxIterExceeded {
            max_iter,
            grad_norm: gradient_norm,
            target,
        });
    }
    let deformation = DeformationField::new(RealField::new(grid, best_u)?, constants)?;
    let report = kinetic_report(wf, Some(&deformation), default_rho_floor(&rho))?;
    Ok(Minimization {
        deformation,
        report,
        iterations,
        gradient_norm,
    })
}
