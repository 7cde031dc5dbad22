//! Sampled real and complex fields tied to a [`Grid`].
//!
//! Fields are immutable after construction and validate finiteness up front,
//! so downstream numerics never meet NaN/Inf mid-computation.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::grid::Grid;

/// Real samples on a grid.
#[derive(Debug, Clone)]
pub struct RealField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

/// Complex samples on a grid.
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl RealField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(CoreError::LengthMismatch {
                len: values.len(),
                n: grid.n(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(CoreError::NonFinite { index, value });
            }
        }
        Ok(RealField { grid, values })
    }

    /// Wrap values known to be finite (derivatives of validated fields etc.).
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        RealField { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&x| f(x)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n();
        RealField {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Result<Self> {
        let n = grid.n();
        Self::new(grid, vec![c; n])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Spectral (periodic) or 6th-order finite-difference (dirichlet) derivative.
    pub fn derivative(&self) -> RealField {
        RealField::from_raw(self.grid.clone(), self.grid.derivative_samples(&self.values))
    }

    /// Quadrature owned by the grid.
    pub fn integrate(&self) -> f64 {
        self.grid.integrate_samples(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |a, &v| a.min(v))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField::from_raw(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Result<RealField> {
        if !self.grid.same_mesh(other.grid()) {
            return Err(CoreError::GridMismatch);
        }
        Ok(RealField::from_raw(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// L2 norm `sqrt(integrate(f^2))`.
    pub fn l2_norm(&self) -> f64 {
        self.grid
            .integrate_samples(&self.values.iter().map(|v| v * v).collect::<Vec<_>>())
            .sqrt()
    }
}

impl ComplexField {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(CoreError::LengthMismatch {
                len: values.len(),
                n: grid.n(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.re.is_finite() || !value.im.is_finite() {
                return Err(CoreError::NonFinite {
                    index,
                    value: if value.re.is_finite() { value.im } else { value.re },
                });
            }
        }
        Ok(ComplexField { grid, values })
    }

    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        ComplexField { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.points().iter().map(|&x| f(x)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn derivative(&self) -> ComplexField {
        ComplexField::from_raw(
            self.grid.clone(),
            self.grid.derivative_complex_samples(&self.values),
        )
    }

    pub fn integrate(&self) -> Complex64 {
        self.grid.integrate_complex_samples(&self.values)
    }

    /// Pointwise squared magnitude as a real field.
    pub fn abs_squared(&self) -> RealField {
        RealField::from_raw(
            self.grid.clone(),
            self.values.iter().map(|v| v.norm_sqr()).collect(),
        )
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ComplexField {
        ComplexField::from_raw(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// L2 distance `sqrt(integrate(|a-b|^2))` between two complex fields.
    pub fn l2_distance(&self, other: &ComplexField) -> Result<f64> {
        if !self.grid.same_mesh(other.grid()) {
            return Err(CoreError::GridMismatch);
        }
        let diff: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .collect();
        Ok(self.grid.integrate_samples(&diff).sqrt())
    }
}
