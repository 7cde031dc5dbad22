//! Quantum states and classical ensembles, and the polar map between them.
//!
//! A [`WaveFunction`] is a complex field with physical constants attached; a
//! [`ClassicalEnsemble`] is the polar pair `(rho, S)` of a probability
//! density and Hamilton principal function. [`WaveFunction::polar_decompose`]
//! and [`from_polar`] convert between the two, with the phase unwrapped
//! cumulatively in 1D and a floor-plus-mask policy at points where the
//! density is too small to carry a meaningful phase.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::field::{ComplexField, RealField};
use crate::grid::{Boundary, Grid};

/// hbar and particle mass; both default to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { hbar: 1.0, mass: 1.0 }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(CoreError::NonPositive { name: "hbar", value: hbar });
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(CoreError::NonPositive { name: "mass", value: mass });
        }
        Ok(PhysicalConstants { hbar, mass })
    }
}

/// Complex wavefunction samples plus constants.
#[derive(Debug, Clone)]
pub struct WaveFunction {
    psi: ComplexField,
    constants: PhysicalConstants,
}

/// Polar pair `(rho, S)` plus constants.
///
/// `S` carries an arbitrary global additive constant; compare it only through
/// gradients or differences.
#[derive(Debug, Clone)]
pub struct ClassicalEnsemble {
    rho: RealField,
    s: RealField,
    constants: PhysicalConstants,
}

/// Result of a polar decomposition: the ensemble plus a mask flagging the
/// points where `rho` fell below the floor and `S` was interpolated.
#[derive(Debug, Clone)]
pub struct PolarDecomposition {
    pub ensemble: ClassicalEnsemble,
    pub mask: Vec<bool>,
}

impl PolarDecomposition {
    /// Number of interpolated (below-floor) points.
    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

impl WaveFunction {
    pub fn new(psi: ComplexField, constants: PhysicalConstants) -> Result<Self> {
        PhysicalConstants::new(constants.hbar, constants.mass)?;
        Ok(WaveFunction { psi, constants })
    }

    pub fn psi(&self) -> &ComplexField {
        &self.psi
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.psi.grid()
    }

    pub fn constants(&self) -> PhysicalConstants {
        self.constants
    }

    /// `rho = psi* psi`, nonnegative by construction.
    pub fn density(&self) -> RealField {
        self.psi.abs_squared()
    }

    /// `integrate(|psi|^2)`.
    pub fn norm_sq(&self) -> f64 {
        self.density().integrate()
    }

    /// Rescale so the density integrates to one.
    pub fn normalize(&self) -> Result<WaveFunction> {
        let norm_sq = self.norm_sq();
        if norm_sq <= 0.0 || !norm_sq.is_finite() {
            return Err(CoreError::ZeroNorm);
        }
        let scale = 1.0 / norm_sq.sqrt();
        Ok(WaveFunction {
            psi: self.psi.map(|c| c * scale),
            constants: self.constants,
        })
    }

    /// Polar decomposition `psi = sqrt(rho) exp(iS/hbar)`.
    ///
    /// The phase is unwrapped cumulatively from the leftmost point whose
    /// density clears `rho_floor`, adding multiples of 2π whenever successive
    /// raw phases jump by more than π. `S` is pinned to zero at that first
    /// valid point. Below-floor points get `S` by linear interpolation
    /// between the flanking valid points (constant extension at the ends)
    /// and are flagged in the returned mask.
    pub fn polar_decompose(&self, rho_floor: f64) -> Result<PolarDecomposition> {
        let rho = self.density();
        let n = rho.len();
        let valid: Vec<bool> = rho.values().iter().map(|&r| r >= rho_floor).collect();
        let n_valid = valid.iter().filter(|&&v| v).count();
        if n_valid < 2 {
            return Err(CoreError::BelowResolutionFloor { valid: n_valid, n });
        }

        let hbar = self.constants.hbar;
        let theta: Vec<f64> = self.psi.values().iter().map(|c| c.im.atan2(c.re)).collect();
        let mut s = vec![0.0; n];
        let mut prev: Option<usize> = None;
        for i in 0..n {
            if valid[i] {
                if let Some(p) = prev {
                    s[i] = s[p] + hbar * wrap_to_pi(theta[i] - theta[p]);
                }
                prev = Some(i);
            }
        }
        interpolate_masked(&mut s, &valid);

        let grid = self.psi.grid().clone();
        let ensemble = ClassicalEnsemble {
            rho,
            s: RealField::from_raw(grid, s),
            constants: self.constants,
        };
        let mask = valid.iter().map(|&v| !v).collect();
        Ok(PolarDecomposition { ensemble, mask })
    }
}

impl ClassicalEnsemble {
    /// Validating constructor: matching grids, nonnegative density,
    /// `integrate(rho)` within 1e-6 of one.
    pub fn new(rho: RealField, s: RealField, constants: PhysicalConstants) -> Result<Self> {
        PhysicalConstants::new(constants.hbar, constants.mass)?;
        if !rho.grid().same_mesh(s.grid()) {
            return Err(CoreError::GridMismatch);
        }
        for (index, &value) in rho.values().iter().enumerate() {
            if value < 0.0 {
                return Err(CoreError::NegativeDensity { index, value });
            }
        }
        let total = rho.integrate();
        if (total - 1.0).abs() > 1e-6 {
            return Err(CoreError::NotNormalized { total, tol: 1e-6 });
        }
        Ok(ClassicalEnsemble { rho, s, constants })
    }

    /// Rescale the density to unit mass, then validate.
    pub fn normalized(rho: RealField, s: RealField, constants: PhysicalConstants) -> Result<Self> {
        let total = rho.integrate();
        if total <= 0.0 || !total.is_finite() {
            return Err(CoreError::ZeroNorm);
        }
        let scale = 1.0 / total;
        Self::new(rho.map(|v| v * scale), s, constants)
    }

    /// Internal constructor for propagator snapshots, where pre-caustic
    /// densities may dip a hair below zero.
    pub(crate) fn from_fields_unchecked(
        rho: RealField,
        s: RealField,
        constants: PhysicalConstants,
    ) -> Self {
        ClassicalEnsemble { rho, s, constants }
    }

    pub fn rho(&self) -> &RealField {
        &self.rho
    }

    pub fn s(&self) -> &RealField {
        &self.s
    }

    pub fn constants(&self) -> PhysicalConstants {
        self.constants
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.rho.grid()
    }
}

/// `psi = sqrt(rho) exp(iS/hbar)`, normalized.
pub fn from_polar(ens: &ClassicalEnsemble) -> Result<WaveFunction> {
    let wf = WaveFunction::new(polar_wave_samples(ens.rho(), ens.s(), ens.constants().hbar), ens.constants())?;
    wf.normalize()
}

/// Raw polar reconstruction without normalization.
pub(crate) fn polar_wave_samples(rho: &RealField, s: &RealField, hbar: f64) -> ComplexField {
    let values: Vec<Complex64> = rho
        .values()
        .iter()
        .zip(s.values())
        .map(|(&r, &sv)| {
            let amp = r.max(0.0).sqrt();
            let phase = sv / hbar;
            Complex64::new(amp * phase.cos(), amp * phase.sin())
        })
        .collect();
    ComplexField::from_raw(rho.grid().clone(), values)
}

/// Normalized Gaussian packet `exp(-(x-x0)^2/(4 sigma^2)) exp(i k0 x)`.
///
/// `sigma` is the standard deviation of the resulting density. Rejects
/// under-resolved widths (`sigma < 3 dx`) and, on dirichlet grids, supports
/// that reach within 5 sigma of a boundary.
pub fn gaussian_packet(
    grid: Arc<Grid>,
    constants: PhysicalConstants,
    x0: f64,
    sigma: f64,
    k0: f64,
) -> Result<WaveFunction> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(CoreError::NonPositive { name: "sigma", value: sigma });
    }
    let min_sigma = 3.0 * grid.dx();
    if sigma < min_sigma {
        return Err(CoreError::UnderResolved { sigma, min_sigma });
    }
    if grid.boundary() == Boundary::Dirichlet {
        let lo = x0 - 5.0 * sigma;
        let hi = x0 + 5.0 * sigma;
        if lo < grid.x_min() || hi > grid.x_max() {
            return Err(CoreError::SupportOutsideDomain {
                lo,
                hi,
                x_min: grid.x_min(),
                x_max: grid.x_max(),
            });
        }
    }
    let psi = ComplexField::from_fn(grid, |x| {
        let arg = -(x - x0).powi(2) / (4.0 * sigma * sigma);
        let amp = arg.exp();
        Complex64::new(amp * (k0 * x).cos(), amp * (k0 * x).sin())
    })?;
    WaveFunction::new(psi, constants)?.normalize()
}

/// One component of a Gaussian superposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub x0: f64,
    pub sigma: f64,
    pub k0: f64,
}

/// Normalized superposition of Gaussian packets.
pub fn gaussian_superposition(
    grid: Arc<Grid>,
    constants: PhysicalConstants,
    components: &[GaussianComponent],
) -> Result<WaveFunction> {
    if components.is_empty() {
        return Err(CoreError::ZeroNorm);
    }
    for c in components {
        if !(c.sigma.is_finite() && c.sigma > 0.0) {
            return Err(CoreError::NonPositive { name: "sigma", value: c.sigma });
        }
        let min_sigma = 3.0 * grid.dx();
        if c.sigma < min_sigma {
            return Err(CoreError::UnderResolved { sigma: c.sigma, min_sigma });
        }
    }
    let psi = ComplexField::from_fn(grid, |x| {
        components
            .iter()
            .map(|c| {
                let arg = -(x - c.x0).powi(2) / (4.0 * c.sigma * c.sigma);
                let amp = c.weight * arg.exp();
                Complex64::new(amp * (c.k0 * x).cos(), amp * (c.k0 * x).sin())
            })
            .sum()
    })?;
    WaveFunction::new(psi, constants)?.normalize()
}

/// Plane wave `exp(ikx)/sqrt(L)` on a periodic grid.
///
/// `k` must be an integer multiple of `2 pi / L`.
pub fn plane_wave(grid: Arc<Grid>, constants: PhysicalConstants, k: f64) -> Result<WaveFunction> {
    if grid.boundary() != Boundary::Periodic {
        return Err(CoreError::PeriodicRequired);
    }
    let base = 2.0 * PI / grid.length();
    let ratio = k / base;
    if (ratio - ratio.round()).abs() > 1e-9 {
        return Err(CoreError::NonCommensurate { k, base });
    }
    let amp = 1.0 / grid.length().sqrt();
    let psi = ComplexField::from_fn(grid, |x| {
        Complex64::new(amp * (k * x).cos(), amp * (k * x).sin())
    })?;
    WaveFunction::new(psi, constants)?.normalize()
}

/// Default density floor: `1e-12 * max(rho)`.
pub fn default_rho_floor(rho: &RealField) -> f64 {
    1e-12 * rho.max()
}

/// Wrap a phase difference into `(-pi, pi]`.
pub(crate) fn wrap_to_pi(d: f64) -> f64 {
    let mut r = d % (2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    } else if r < -PI {
        r += 2.0 * PI;
    }
    r
}

/// Fill invalid entries: linear interpolation across interior gaps, constant
/// extension at the ends. `valid` must contain at least one true entry.
pub(crate) fn interpolate_masked(values: &mut [f64], valid: &[bool]) {
    let n = values.len();
    let first = valid.iter().position(|&v| v).expect("at least one valid point");
    let last = n - 1 - valid.iter().rev().position(|&v| v).unwrap();
    for i in 0..first {
        values[i] = values[first];
    }
    for i in last + 1..n {
        values[i] = values[last];
    }
    let mut a = first;
    while a < last {
        let b = match (a + 1..=last).find(|&j| valid[j]) {
            Some(b) => b,
            None => break,
        };
        if b > a + 1 {
            let va = values[a];
            let vb = values[b];
            let span = (b - a) as f64;
            for i in a + 1..b {
                let t = (i - a) as f64 / span;
                values[i] = va + t * (vb - va);
            }
        }
        a = b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn l2_up_to_phase(a: &WaveFunction, b: &WaveFunction) -> f64 {
        l2_up_to_phase_where(a, b, None)
    }

    /// L2 distance after aligning the global phase, restricted to points
    /// where `mask` (if given) is false.
    fn l2_up_to_phase_where(a: &WaveFunction, b: &WaveFunction, mask: Option<&[bool]>) -> f64 {
        let keep = |i: usize| mask.map_or(true, |m| !m[i]);
        let overlap: Complex64 = a
            .psi()
            .values()
            .iter()
            .zip(b.psi().values())
            .zip(a.grid().weights())
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, ((pa, pb), &w))| pa.conj() * pb * w)
            .sum();
        let phase = overlap / overlap.norm();
        let dist_sq: f64 = a
            .psi()
            .values()
            .iter()
            .zip(b.psi().values())
            .zip(a.grid().weights())
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, ((pa, pb), &w))| w * (pa * phase - pb).norm_sqr())
            .sum();
        dist_sq.sqrt()
    }

    #[test]
    fn gaussian_packet_is_normalized_and_real_for_zero_k0() {
        let g = Grid::periodic(-8.0, 8.0, 512).unwrap();
        let wf = gaussian_packet(g, PhysicalConstants::default(), 0.0, 1.0, 0.0).unwrap();
        assert!((wf.norm_sq() - 1.0).abs() <= 1e-10);
        let max_im = wf
            .psi()
            .values()
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.im.abs()));
        assert!(max_im == 0.0);
    }

    #[test]
    fn gaussian_packet_density_width_matches_sigma() {
        let g = Grid::periodic(-8.0, 8.0, 512).unwrap();
        let wf = gaussian_packet(g, PhysicalConstants::default(), 0.0, 1.0, 0.0).unwrap();
        let rho = wf.density();
        let x2: f64 = rho
            .values()
            .iter()
            .zip(rho.grid().points())
            .zip(rho.grid().weights())
            .map(|((&r, &x), &w)| w * r * x * x)
            .sum();
        assert!((x2 - 1.0).abs() <= 1e-8, "sigma_rho^2 = {x2}");
    }

    #[test]
    fn gaussian_packet_rejects_bad_sigma() {
        let g = Grid::periodic(-8.0, 8.0, 512).unwrap();
        assert!(matches!(
            gaussian_packet(g.clone(), PhysicalConstants::default(), 0.0, -1.0, 0.0),
            Err(CoreError::NonPositive { .. })
        ));
        assert!(matches!(
            gaussian_packet(g, PhysicalConstants::default(), 0.0, 0.05, 0.0),
            Err(CoreError::UnderResolved { .. })
        ));
        let d = Grid::dirichlet(-8.0, 8.0, 513).unwrap();
        assert!(matches!(
            gaussian_packet(d, PhysicalConstants::default(), 6.0, 1.0, 0.0),
            Err(CoreError::SupportOutsideDomain { .. })
        ));
    }

    #[test]
    fn real_gaussian_decomposes_to_zero_phase_with_empty_mask() {
        // [-6, 6] keeps the tail density above the default floor.
        let g = Grid::periodic(-6.0, 6.0, 512).unwrap();
        let wf = gaussian_packet(g, PhysicalConstants::default(), 0.0, 1.0, 0.0).unwrap();
        let floor = default_rho_floor(&wf.density());
        let pd = wf.polar_decompose(floor).unwrap();
        assert_eq!(pd.masked_count(), 0);
        assert!(pd.ensemble.s().max_abs() <= 1e-12);
    }

    #[test]
    fn plane_wave_unwraps_to_linear_s() {
        let g = Grid::periodic(0.0, 2.0 * PI, 64).unwrap();
        let wf = plane_wave(g, PhysicalConstants::default(), 1.0).unwrap();
        let floor = default_rho_floor(&wf.density());
        let pd = wf.polar_decompose(floor).unwrap();
        assert_eq!(pd.masked_count(), 0);
        let s = pd.ensemble.s();
        let dx = s.grid().dx();
        for i in 0..s.len() - 1 {
            let slope = (s.values()[i + 1] - s.values()[i]) / dx;
            assert!((slope - 1.0).abs() <= 1e-10, "slope {slope} at {i}");
        }
    }

    #[test]
    fn packet_phase_gradient_recovers_k0() {
        let g = Grid::periodic(-8.0, 8.0, 512).unwrap();
        let wf = gaussian_packet(g, PhysicalConstants::default(), 0.0, 1.0, 2.0).unwrap();
        let floor = default_rho_floor(&wf.density());
        let pd = wf.polar_decompose(floor).unwrap();
        let s = pd.ensemble.s();
        let dx = s.grid().dx();
        let mut worst = 0.0_f64;
        for i in 0..s.len() - 1 {
            if !pd.mask[i] && !pd.mask[i + 1] {
                let slope = (s.values()[i + 1] - s.values()[i]) / dx;
                worst = worst.max((slope - 2.0).abs());
            }
        }
        assert!(worst <= 1e-6, "worst slope error {worst}");
    }

    #[test]
    fn polar_round_trip_recovers_psi_up_to_global_phase() {
        let g = Grid::periodic(-8.0, 8.0, 512).unwrap();
        let wf = gaussian_packet(g, PhysicalConstants::default(), 0.5, 1.0, 1.5).unwrap();
        let floor = default_rho_floor(&wf.density());
        let pd = wf.polar_decompose(floor).unwrap();
        let back = from_polar(&pd.ensemble).unwrap();
        // compare only where the decomposition kept physical values
        assert!(l2_up_to_phase_where(&back, &wf, Some(&pd.mask)) <= 1e-10);
    }

    #[test]
    fn from_polar_builds_plane_wave() {
        let g = Grid::periodic(0.0, 2.0 * PI, 64).unwrap();
        let constants = PhysicalConstants::default();
        let l = g.length();
        let rho = RealField::constant(g.clone(), 1.0 / l).unwrap();
        let s = RealField::from_fn(g.clone(), |x| x).unwrap();
        let ens = ClassicalEnsemble::new(rho, s, constants).unwrap();
        let wf = from_polar(&ens).unwrap();
        let reference = plane_wave(g, constants, 1.0).unwrap();
        assert!(l2_up_to_phase(&wf, &reference) <= 1e-10);
    }

    #[test]
    fn normalize_is_scale_invariant_and_rejects_zero() {
        let g = Grid::periodic(-8.0, 8.0, 512).unwrap();
        let wf = gaussian_packet(g.clone(), PhysicalConstants::default(), 0.0, 1.0, 0.0).unwrap();
        let doubled = WaveFunction::new(wf.psi().map(|c| c * 2.0), wf.constants()).unwrap();
        let renorm = doubled.normalize().unwrap();
        assert!(renorm.psi().l2_distance(wf.psi()).unwrap() <= 1e-12);

        let zero = WaveFunction::new(
            ComplexField::from_fn(g, |_| Complex64::new(0.0, 0.0)).unwrap(),
            PhysicalConstants::default(),
        )
        .unwrap();
        assert!(matches!(zero.normalize(), Err(CoreError::ZeroNorm)));
    }

    #[test]
    fn plane_wave_rejects_non_commensurate_k() {
        let g = Grid::periodic(0.0, 2.0 * PI, 64).unwrap();
        assert!(matches!(
            plane_wave(g, PhysicalConstants::default(), 1.3),
            Err(CoreError::NonCommensurate { .. })
        ));
    }

    #[test]
    fn decompose_rejects_all_below_floor() {
        let g = Grid::periodic(-8.0, 8.0, 512).unwrap();
        let wf = gaussian_packet(g, PhysicalConstants::default(), 0.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            wf.polar_decompose(1.0),
            Err(CoreError::BelowResolutionFloor { .. })
        ));
    }

    #[test]
    fn interpolate_masked_fills_gaps_linearly() {
        let mut v = vec![0.0, 7.0, 0.0, 0.0, 4.0, 0.0];
        let valid = vec![false, true, false, false, true, false];
        interpolate_masked(&mut v, &valid);
        assert_eq!(v, vec![7.0, 7.0, 6.0, 5.0, 4.0, 4.0]);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]
            #[test]
            fn round_trip_any_packet(
                x0 in -2.0_f64..2.0,
                sigma in 0.4_f64..1.2,
                k0 in -3.0_f64..3.0,
            ) {
                let g = Grid::periodic(-8.0, 8.0, 256).unwrap();
                let wf = gaussian_packet(g, PhysicalConstants::default(), x0, sigma, k0).unwrap();
                let floor = default_rho_floor(&wf.density());
                let pd = wf.polar_decompose(floor).unwrap();
                let back = from_polar(&pd.ensemble).unwrap();
                prop_assert!((back.norm_sq() - 1.0).abs() <= 1e-10);
                prop_assert!(l2_up_to_phase_where(&back, &wf, Some(&pd.mask)) <= 1e-9);
            }

            #[test]
            fn density_normalizes(
                x0 in -2.0_f64..2.0,
                sigma in 0.4_f64..1.2,
            ) {
                let g = Grid::periodic(-8.0, 8.0, 256).unwrap();
                let wf = gaussian_packet(g, PhysicalConstants::default(), x0, sigma, 0.0).unwrap();
                prop_assert!((wf.density().integrate() - 1.0).abs() <= 1e-10);
            }
        }
    }
}
