//! Error type shared by all core modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("grid must have at least {min} points, got {n}")]
    GridTooSmall { n: usize, min: usize },

    #[error("invalid grid bounds: x_min = {x_min} must lie below x_max = {x_max}")]
    BadBounds { x_min: f64, x_max: f64 },

    #[error("field length {len} does not match grid size {n}")]
    LengthMismatch { len: usize, n: usize },

    #[error("non-finite sample at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,

    #[error("physical constants mismatch between operands")]
    ConstantsMismatch,

    #[error("operation requires a periodic grid")]
    PeriodicRequired,

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("sigma = {sigma} is under-resolved: requires sigma >= 3 dx = {min_sigma}")]
    UnderResolved { sigma: f64, min_sigma: f64 },

    #[error(
        "packet support [{lo}, {hi}] extends outside the dirichlet domain [{x_min}, {x_max}]"
    )]
    SupportOutsideDomain {
        lo: f64,
        hi: f64,
        x_min: f64,
        x_max: f64,
    },

    #[error("wavenumber k = {k} is not an integer multiple of 2*pi/L = {base}")]
    NonCommensurate { k: f64, base: f64 },

    #[error("zero-norm state cannot be normalized")]
    ZeroNorm,

    #[error("density is negative at index {index}: {value}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("density integrates to {total}, expected 1 within {tol}")]
    NotNormalized { total: f64, tol: f64 },

    #[error("state below resolution floor: only {valid} of {n} points above rho_floor")]
    BelowResolutionFloor { valid: usize, n: usize },

    #[error(
        "minimizer exceeded {max_iter} iterations; gradient norm {grad_norm:e} above target {target:e}"
    )]
    MaxIterExceeded {
        max_iter: usize,
        grad_norm: f64,
        target: f64,
    },

    #[error(
        "time step too large for spectral resolution: hbar*kmax^2*|dt|/(2m) = {phase} must be < pi"
    )]
    DtTooLarge { phase: f64 },

    #[error("time step must be nonzero")]
    ZeroDt,

    #[error("non-finite state encountered at step {step} (t = {t})")]
    NanAtStep { step: usize, t: f64 },
}

pub type Result<T> = std::result::Result<T, CoreError>;
