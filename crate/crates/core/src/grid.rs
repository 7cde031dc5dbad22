//! Uniform 1D meshes with differentiation and quadrature.
//!
//! Every other module differentiates and integrates exclusively through
//! [`Grid`], so derivative/quadrature compatibility (needed by the
//! integration-by-parts identities) holds crate-wide by construction.
//!
//! Periodic grids differentiate spectrally (Fourier collocation, exact to
//! round-off on resolved modes) and integrate with the Riemann sum, which is
//! spectrally accurate for smooth periodic integrands. Dirichlet grids use
//! 6th-order finite-difference stencils (one-sided closures at the edges,
//! generated by Fornberg's algorithm) and composite Simpson quadrature when
//! the point count is odd, falling back to the trapezoid rule otherwise.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{CoreError, Result};

/// Minimum number of grid points.
pub const MIN_POINTS: usize = 8;

/// Half-width of the interior finite-difference stencil (7 points, 6th order).
const STENCIL_HALF: usize = 3;
const STENCIL_WIDTH: usize = 2 * STENCIL_HALF + 1;

/// Boundary handling of the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// `x_max` is identified with `x_min`; the last point is excluded.
    Periodic,
    /// Both endpoints are included.
    Dirichlet,
}

/// Quadrature rule owned by the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// Uniform Riemann sum (periodic grids).
    Riemann,
    /// Composite Simpson rule (dirichlet grids with an odd point count).
    Simpson,
    /// Trapezoid rule (dirichlet grids with an even point count).
    Trapezoid,
}

impl Quadrature {
    pub fn name(self) -> &'static str {
        match self {
            Quadrature::Riemann => "riemann",
            Quadrature::Simpson => "simpson",
            Quadrature::Trapezoid => "trapezoid",
        }
    }
}

/// Uniform 1D mesh with differentiation and quadrature.
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
    boundary: Boundary,
    dx: f64,
    points: Vec<f64>,
    weights: Vec<f64>,
    quadrature: Quadrature,
    /// Angular wavenumbers in FFT ordering (periodic only, empty otherwise).
    wavenumbers: Vec<f64>,
    fft_forward: Option<Arc<dyn Fft<f64>>>,
    fft_inverse: Option<Arc<dyn Fft<f64>>>,
    /// First-derivative stencil rows (dirichlet only).
    stencil: Option<FdStencil>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("x_min", &self.x_min)
            .field("x_max", &self.x_max)
            .field("n", &self.n)
            .field("boundary", &self.boundary)
            .field("dx", &self.dx)
            .finish()
    }
}

/// Precomputed finite-difference rows for a uniform 7-point window.
///
/// `rows[p]` holds the weights for evaluating the derivative at position `p`
/// of the window (0..7); interior points use the centered row `p = 3`.
#[derive(Debug, Clone)]
struct FdStencil {
    rows: [[f64; STENCIL_WIDTH]; STENCIL_WIDTH],
}

impl Grid {
    /// Periodic mesh on `[x_min, x_max)`; the right endpoint is excluded.
    pub fn periodic(x_min: f64, x_max: f64, n: usize) -> Result<Arc<Grid>> {
        Self::build(x_min, x_max, n, Boundary::Periodic)
    }

    /// Dirichlet mesh on `[x_min, x_max]`; both endpoints are included.
    pub fn dirichlet(x_min: f64, x_max: f64, n: usize) -> Result<Arc<Grid>> {
        Self::build(x_min, x_max, n, Boundary::Dirichlet)
    }

    fn build(x_min: f64, x_max: f64, n: usize, boundary: Boundary) -> Result<Arc<Grid>> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(CoreError::BadBounds { x_min, x_max });
        }
        if n < MIN_POINTS {
            return Err(CoreError::GridTooSmall { n, min: MIN_POINTS });
        }
        let length = x_max - x_min;
        let dx = match boundary {
            Boundary::Periodic => length / n as f64,
            Boundary::Dirichlet => length / (n - 1) as f64,
        };
        let points: Vec<f64> = (0..n).map(|i| x_min + i as f64 * dx).collect();

        let (weights, quadrature) = match boundary {
            Boundary::Periodic => (vec![dx; n], Quadrature::Riemann),
            Boundary::Dirichlet => {
                if n % 2 == 1 {
                    let mut w = vec![2.0 * dx / 3.0; n];
                    for (i, wi) in w.iter_mut().enumerate() {
                        if i % 2 == 1 {
                            *wi = 4.0 * dx / 3.0;
                        }
                    }
                    w[0] = dx / 3.0;
                    w[n - 1] = dx / 3.0;
                    (w, Quadrature::Simpson)
                } else {
                    let mut w = vec![dx; n];
                    w[0] = 0.5 * dx;
                    w[n - 1] = 0.5 * dx;
                    (w, Quadrature::Trapezoid)
                }
            }
        };

        let (wavenumbers, fft_forward, fft_inverse, stencil) = match boundary {
            Boundary::Periodic => {
                let base = 2.0 * PI / length;
                let wavenumbers = (0..n)
                    .map(|j| {
                        let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                        base * m
                    })
                    .collect();
                let mut planner = FftPlanner::new();
                let fwd = planner.plan_fft_forward(n);
                let inv = planner.plan_fft_inverse(n);
                (wavenumbers, Some(fwd), Some(inv), None)
            }
            Boundary::Dirichlet => (Vec::new(), None, None, Some(FdStencil::uniform())),
        };

        Ok(Arc::new(Grid {
            x_min,
            x_max,
            n,
            boundary,
            dx,
            points,
            weights,
            quadrature,
            wavenumbers,
            fft_forward,
            fft_inverse,
            stencil,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Domain length `x_max - x_min`.
    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn x(&self, i: usize) -> f64 {
        self.points[i]
    }

    /// Quadrature weights; `integrate(f) = sum_i w_i f_i`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Angular wavenumbers in FFT ordering (empty on dirichlet grids).
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Largest resolvable angular wavenumber (periodic grids).
    pub fn k_max(&self) -> f64 {
        self.wavenumbers.iter().fold(0.0, |a, &k| a.max(k.abs()))
    }

    /// Two grids interoperate when shape, bounds and boundary mode agree.
    pub fn same_mesh(&self, other: &Grid) -> bool {
        self.n == other.n
            && self.boundary == other.boundary
            && self.x_min == other.x_min
            && self.x_max == other.x_max
    }

    /// Quadrature of real samples.
    pub fn integrate_samples(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Quadrature of complex samples.
    pub fn integrate_complex_samples(&self, values: &[Complex64]) -> Complex64 {
        debug_assert_eq!(values.len(), self.n);
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| v * *w)
            .sum()
    }

    /// First derivative of complex samples.
    pub fn derivative_complex_samples(&self, values: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.n);
        match self.boundary {
            Boundary::Periodic => self.spectral_derivative(values),
            Boundary::Dirichlet => {
                let stencil = self.stencil.as_ref().unwrap();
                stencil.apply_complex(values, self.dx)
            }
        }
    }

    /// First derivative of real samples.
    pub fn derivative_samples(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.n);
        match self.boundary {
            Boundary::Periodic => {
                let complex: Vec<Complex64> =
                    values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                self.spectral_derivative(&complex)
                    .into_iter()
                    .map(|c| c.re)
                    .collect()
            }
            Boundary::Dirichlet => {
                let stencil = self.stencil.as_ref().unwrap();
                stencil.apply_real(values, self.dx)
            }
        }
    }

    /// Spectral derivative: FFT, multiply by `ik` (Nyquist zeroed), inverse FFT.
    fn spectral_derivative(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        let fwd = self.fft_forward.as_ref().expect("periodic grid");
        let inv = self.fft_inverse.as_ref().expect("periodic grid");
        fwd.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        let nyquist = if self.n % 2 == 0 { Some(self.n / 2) } else { None };
        for (j, c) in buf.iter_mut().enumerate() {
            if Some(j) == nyquist {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= Complex64::new(0.0, self.wavenumbers[j] * scale);
            }
        }
        inv.process(&mut buf);
        buf
    }

    /// Forward FFT of complex samples (unnormalized, periodic grids only).
    pub(crate) fn fft(&self, values: &mut [Complex64]) {
        self.fft_forward
            .as_ref()
            .expect("periodic grid")
            .process(values);
    }

    /// Inverse FFT; divides by `n` so `ifft(fft(x)) = x`.
    pub(crate) fn ifft(&self, values: &mut [Complex64]) {
        self.fft_inverse
            .as_ref()
            .expect("periodic grid")
            .process(values);
        let scale = 1.0 / self.n as f64;
        for v in values.iter_mut() {
            *v *= scale;
        }
    }

    /// Zero out modes with |k| above two thirds of the Nyquist wavenumber.
    ///
    /// Applied to quadratic products in the classical propagator so aliasing
    /// does not corrupt conservation.
    pub(crate) fn dealias(&self, values: &mut [f64]) {
        let k_cut = self.k_max() * (2.0 / 3.0);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft(&mut buf);
        for (j, c) in buf.iter_mut().enumerate() {
            if self.wavenumbers[j].abs() > k_cut {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        self.ifft(&mut buf);
        for (v, c) in values.iter_mut().zip(&buf) {
            *v = c.re;
        }
    }
}

impl FdStencil {
    /// Rows for all window positions on a uniform unit-spaced 7-point window.
    fn uniform() -> FdStencil {
        let nodes: Vec<f64> = (0..STENCIL_WIDTH).map(|i| i as f64).collect();
        let mut rows = [[0.0; STENCIL_WIDTH]; STENCIL_WIDTH];
        for (p, row) in rows.iter_mut().enumerate() {
            let w = fornberg_weights(p as f64, &nodes, 1);
            row.copy_from_slice(&w);
        }
        FdStencil { rows }
    }

    fn apply_real(&self, values: &[f64], dx: f64) -> Vec<f64> {
        let n = values.len();
        let inv_dx = 1.0 / dx;
        (0..n)
            .map(|i| {
                let start = i.saturating_sub(STENCIL_HALF).min(n - STENCIL_WIDTH);
                let row = &self.rows[i - start];
                let mut acc = 0.0;
                for (j, w) in row.iter().enumerate() {
                    acc += w * values[start + j];
                }
                acc * inv_dx
            })
            .collect()
    }

    fn apply_complex(&self, values: &[Complex64], dx: f64) -> Vec<Complex64> {
        let n = values.len();
        let inv_dx = 1.0 / dx;
        (0..n)
            .map(|i| {
                let start = i.saturating_sub(STENCIL_HALF).min(n - STENCIL_WIDTH);
                let row = &self.rows[i - start];
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, w) in row.iter().enumerate() {
                    acc += values[start + j] * *w;
                }
                acc * inv_dx
            })
            .collect()
    }
}

/// Fornberg weights for the `m`-th derivative at `z` on nodes `x`.
///
/// B. Fornberg, "Generation of finite difference formulas on arbitrarily
/// spaced grids", Math. Comp. 51 (1988).
pub(crate) fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    assert!(n > m);
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}
