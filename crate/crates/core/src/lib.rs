//! Momentum-deformation numerics on 1D grids.
//!
//! The crate evaluates the deformed kinetic functional
//! `T_u = (1/2m) integrate(|(-i hbar grad - i u) psi|^2)` over real local
//! deformations `u` of the quantum momentum, minimizes it in closed form and
//! variationally, verifies the Fisher-information identity at the minimum,
//! and propagates the three dynamical regimes the deformation family
//! generates — quantum (`u = 0`), classical (`u` at the critical point, i.e.
//! Hamilton–Jacobi plus continuity), and fixed generic `u` — side by side.
//!
//! Modules follow the data flow: [`grid`] owns discretization, [`state`]
//! builds wavefunctions and classical ensembles, [`deformation`] carries the
//! kinetic functionals and minimizers, [`dynamics`] the propagators, and
//! [`verify`] the seeded randomized invariant suite.

pub mod deformation;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod grid;
pub mod state;
pub mod verify;

pub use deformation::{
    adjoint_deformed_momentum, apply_deformed_momentum, classical_momentum_field,
    critical_deformation, fisher_information, functional_gradient, kinetic_classical,
    kinetic_deformed_direct, kinetic_deformed_expanded, kinetic_quantum, kinetic_report,
    minimize_deformation, osmotic_momentum, rho_weighted_distance, DeformationField,
    KineticReport, Minimization,
};
pub use dynamics::{
    dequantization_gap, energy_audit, evolve_classical, evolve_deformed_fixed_u,
    evolve_schrodinger, CausticHalt, CausticReason, EnergyAudit, EnergySample, GapPoint,
    GapSeries, Potential, Snapshot, StepDiagnostics, TrajectoryRecord,
};
pub use error::{CoreError, Result};
pub use field::{ComplexField, RealField};
pub use grid::{Boundary, Grid, Quadrature};
pub use state::{
    default_rho_floor, from_polar, gaussian_packet, gaussian_superposition, plane_wave,
    ClassicalEnsemble, GaussianComponent, PhysicalConstants, PolarDecomposition, WaveFunction,
};
pub use verify::{run_verify, run_verify_with, FamilyResult, Fault, VerifyConfig, VerifyReport};
