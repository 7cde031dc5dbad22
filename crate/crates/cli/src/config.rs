//! Run configuration: a single TOML file with nested sections mirroring the
//! run pipeline (grid, constants, state, potential, deformation, evolution,
//! tolerances). See `configs/` for annotated examples.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use dequant_core::dynamics::Potential;
use dequant_core::{
    from_polar, gaussian_packet, gaussian_superposition, plane_wave, Boundary, ClassicalEnsemble,
    DeformationField, Grid, GaussianComponent, PhysicalConstants, RealField, WaveFunction,
};

use crate::error::CliError;

fn default_seed() -> u64 {
    42
}

fn default_record_every() -> usize {
    1
}

fn default_rho_floor_rel() -> f64 {
    1e-12
}

fn default_minimizer_tol() -> f64 {
    1e-6
}

fn default_max_iter() -> usize {
    20_000
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for randomized suites.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub grid: GridConfig,
    #[serde(default)]
    pub constants: ConstantsConfig,
    pub state: StateConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub deformation: DeformationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionConfig>,
    #[serde(default)]
    pub tolerances: TolerancesConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub boundary: BoundaryConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    Periodic,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig { hbar: 1.0, mass: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateConfig {
    GaussianPacket {
        x0: f64,
        sigma: f64,
        #[serde(default)]
        k0: f64,
    },
    PlaneWave {
        k: f64,
    },
    Superposition {
        components: Vec<ComponentConfig>,
    },
    Polar {
        rho_file: PathBuf,
        s_file: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    pub x0: f64,
    pub sigma: f64,
    #[serde(default)]
    pub k0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    #[default]
    Free,
    Harmonic {
        omega: f64,
    },
    File {
        file: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeformationConfig {
    #[default]
    None,
    Critical,
    Constant {
        c: f64,
    },
    File {
        file: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TolerancesConfig {
    /// Density floor relative to max(rho).
    #[serde(default = "default_rho_floor_rel")]
    pub rho_floor: f64,
    #[serde(default = "default_minimizer_tol")]
    pub minimizer_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for TolerancesConfig {
    fn default() -> Self {
        TolerancesConfig {
            rho_floor: default_rho_floor_rel(),
            minimizer_tol: default_minimizer_tol(),
            max_iter: default_max_iter(),
        }
    }
}

impl RunConfig {
    /// Parse and field-validate a config file. Parse errors carry the TOML
    /// line/field diagnostics. Relative sample-file paths resolve against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            config.rebase_paths(base);
        }
        config.validate()?;
        Ok(config)
    }

    fn rebase_paths(&mut self, base: &Path) {
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        if let StateConfig::Polar { rho_file, s_file } = &mut self.state {
            rebase(rho_file);
            rebase(s_file);
        }
        if let PotentialConfig::File { file } = &mut self.potential {
            rebase(file);
        }
        if let DeformationConfig::File { file } = &mut self.deformation {
            rebase(file);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.grid.x_min < self.grid.x_max) {
            return Err(CliError::Config(format!(
                "grid: x_min = {} must lie below x_max = {}",
                self.grid.x_min, self.grid.x_max
            )));
        }
        if self.grid.n < 8 {
            return Err(CliError::Config(format!(
                "grid: n = {} must be at least 8",
                self.grid.n
            )));
        }
        if self.constants.hbar <= 0.0 {
            return Err(CliError::Config(format!(
                "constants: hbar = {} must be positive",
                self.constants.hbar
            )));
        }
        if self.constants.mass <= 0.0 {
            return Err(CliError::Config(format!(
                "constants: mass = {} must be positive",
                self.constants.mass
            )));
        }
        match &self.state {
            StateConfig::GaussianPacket { sigma, .. } => {
                if *sigma <= 0.0 {
                    return Err(CliError::Config(format!(
                        "state: sigma = {sigma} must be positive"
                    )));
                }
            }
            StateConfig::Superposition { components } => {
                if components.is_empty() {
                    return Err(CliError::Config(
                        "state: superposition needs at least one component".into(),
                    ));
                }
                for (i, comp) in components.iter().enumerate() {
                    if comp.sigma <= 0.0 {
                        return Err(CliError::Config(format!(
                            "state: components[{i}].sigma = {} must be positive",
                            comp.sigma
                        )));
                    }
                }
            }
            StateConfig::PlaneWave { .. } => {}
            StateConfig::Polar { rho_file, s_file } => {
                for f in [rho_file, s_file] {
                    if !f.exists() {
                        return Err(CliError::Config(format!(
                            "state: referenced file {} does not exist",
                            f.display()
                        )));
                    }
                }
            }
        }
        if let PotentialConfig::File { file } = &self.potential {
            if !file.exists() {
                return Err(CliError::Config(format!(
                    "potential: referenced file {} does not exist",
                    file.display()
                )));
            }
        }
        if let DeformationConfig::File { file } = &self.deformation {
            if !file.exists() {
                return Err(CliError::Config(format!(
                    "deformation: referenced file {} does not exist",
                    file.display()
                )));
            }
        }
        if let Some(evo) = &self.evolution {
            if !(evo.dt.is_finite() && evo.dt > 0.0) {
                return Err(CliError::Config(format!(
                    "evolution: dt = {} must be positive and finite",
                    evo.dt
                )));
            }
            if evo.n_steps == 0 {
                return Err(CliError::Config("evolution: n_steps must be positive".into()));
            }
        }
        if self.tolerances.rho_floor <= 0.0 {
            return Err(CliError::Config(format!(
                "tolerances: rho_floor = {} must be positive",
                self.tolerances.rho_floor
            )));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>, CliError> {
        let grid = match self.grid.boundary {
            BoundaryConfig::Periodic => Grid::periodic(self.grid.x_min, self.grid.x_max, self.grid.n),
            BoundaryConfig::Dirichlet => {
                Grid::dirichlet(self.grid.x_min, self.grid.x_max, self.grid.n)
            }
        };
        grid.map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    pub fn build_constants(&self) -> Result<PhysicalConstants, CliError> {
        PhysicalConstants::new(self.constants.hbar, self.constants.mass)
            .map_err(|e| CliError::Config(format!("constants: {e}")))
    }

    /// Wavefunction plus, for polar input, the ensemble exactly as loaded.
    pub fn build_state(
        &self,
        grid: &Arc<Grid>,
        constants: PhysicalConstants,
    ) -> Result<(WaveFunction, Option<ClassicalEnsemble>), CliError> {
        match &self.state {
            StateConfig::GaussianPacket { x0, sigma, k0 } => {
                let wf = gaussian_packet(grid.clone(), constants, *x0, *sigma, *k0)
                    .map_err(|e| CliError::Config(format!("state: {e}")))?;
                Ok((wf, None))
            }
            StateConfig::PlaneWave { k } => {
                let wf = plane_wave(grid.clone(), constants, *k)
                    .map_err(|e| CliError::Config(format!("state: {e}")))?;
                Ok((wf, None))
            }
            StateConfig::Superposition { components } => {
                let comps: Vec<GaussianComponent> = components
                    .iter()
                    .map(|c| GaussianComponent {
                        weight: c.weight,
                        x0: c.x0,
                        sigma: c.sigma,
                        k0: c.k0,
                    })
                    .collect();
                let wf = gaussian_superposition(grid.clone(), constants, &comps)
                    .map_err(|e| CliError::Config(format!("state: {e}")))?;
                Ok((wf, None))
            }
            StateConfig::Polar { rho_file, s_file } => {
                let rho = load_samples(rho_file, grid)?;
                let s = load_samples(s_file, grid)?;
                let ens = ClassicalEnsemble::normalized(rho, s, constants)
                    .map_err(|e| CliError::Config(format!("state: {e}")))?;
                let wf = from_polar(&ens)
                    .map_err(|e| CliError::Config(format!("state: {e}")))?;
                Ok((wf, Some(ens)))
            }
        }
    }

    pub fn build_potential(&self, grid: &Arc<Grid>) -> Result<Potential, CliError> {
        match &self.potential {
            PotentialConfig::Free => Ok(Potential::Free),
            PotentialConfig::Harmonic { omega } => Ok(Potential::Harmonic { omega: *omega }),
            PotentialConfig::File { file } => {
                Ok(Potential::Samples(load_samples(file, grid)?))
            }
        }
    }

    /// Deformation field per the config; `None` when the config says none.
    pub fn build_deformation(
        &self,
        grid: &Arc<Grid>,
        constants: PhysicalConstants,
        wf: &WaveFunction,
        rho_floor_abs: f64,
    ) -> Result<Option<DeformationField>, CliError> {
        match &self.deformation {
            DeformationConfig::None => Ok(None),
            DeformationConfig::Critical => {
                let rho = wf.density();
                let u = dequant_core::critical_deformation(&rho, constants, rho_floor_abs)
                    .map_err(|e| CliError::Numerical(format!("deformation: {e}")))?;
                Ok(Some(u))
            }
            DeformationConfig::Constant { c } => {
                let u = DeformationField::constant(grid.clone(), constants, *c)
                    .map_err(|e| CliError::Config(format!("deformation: {e}")))?;
                Ok(Some(u))
            }
            DeformationConfig::File { file } => {
                let samples = load_samples(file, grid)?;
                let u = DeformationField::new(samples, constants)
                    .map_err(|e| CliError::Config(format!("deformation: {e}")))?;
                Ok(Some(u))
            }
        }
    }

    /// Absolute density floor from the relative tolerance.
    pub fn rho_floor_abs(&self, rho: &RealField) -> f64 {
        self.tolerances.rho_floor * rho.max()
    }
}

/// Two-column text samples (x, value), whitespace- or comma-separated; `#`
/// starts a comment. The x column must match the grid points.
pub fn load_samples(path: &Path, grid: &Arc<Grid>) -> Result<RealField, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::with_capacity(grid.n());
    for (line_no, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut cols = body.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
        let x: f64 = cols
            .next()
            .ok_or_else(|| {
                CliError::Config(format!("{}:{}: missing x column", path.display(), line_no + 1))
            })?
            .parse()
            .map_err(|e| {
                CliError::Config(format!("{}:{}: bad x value: {e}", path.display(), line_no + 1))
            })?;
        let value: f64 = cols
            .next()
            .ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: missing value column",
                    path.display(),
                    line_no + 1
                ))
            })?
            .parse()
            .map_err(|e| {
                CliError::Config(format!("{}:{}: bad value: {e}", path.display(), line_no + 1))
            })?;
        let i = values.len();
        if i >= grid.n() {
            return Err(CliError::Config(format!(
                "{}: more rows than the {} grid points",
                path.display(),
                grid.n()
            )));
        }
        let expected = grid.x(i);
        if (x - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
            return Err(CliError::Config(format!(
                "{}:{}: x = {x} does not match grid point {expected}",
                path.display(),
                line_no + 1
            )));
        }
        values.push(value);
    }
    if values.len() != grid.n() {
        return Err(CliError::Config(format!(
            "{}: {} rows do not cover the {} grid points",
            path.display(),
            values.len(),
            grid.n()
        )));
    }
    RealField::new(grid.clone(), values)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Time-step guidance bounds; runs are refused when violated.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DtBounds {
    /// Phase-resolution heuristic for split-step runs: `0.1 m dx^2 / hbar`.
    pub quantum: f64,
    /// Advective CFL for classical runs: `0.2 dx / max|grad(S)/m|`.
    pub classical: f64,
}

pub fn dt_bounds(
    grid: &Arc<Grid>,
    constants: PhysicalConstants,
    wf: &WaveFunction,
) -> DtBounds {
    let quantum = 0.1 * constants.mass * grid.dx() * grid.dx() / constants.hbar;
    let max_speed = dequant_core::classical_momentum_field(wf)
        .map(|p| p.max_abs() / constants.mass)
        .unwrap_or(0.0);
    let classical = if max_speed > 0.0 {
        0.2 * grid.dx() / max_speed
    } else {
        f64::INFINITY
    };
    DtBounds { quantum, classical }
}

pub fn boundary_of(config: &RunConfig) -> Boundary {
    match config.grid.boundary {
        BoundaryConfig::Periodic => Boundary::Periodic,
        BoundaryConfig::Dirichlet => Boundary::Dirichlet,
    }
}
