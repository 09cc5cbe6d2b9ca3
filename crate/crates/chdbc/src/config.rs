//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use chdbc_core::diagnostics::OmegaTolerances;
use chdbc_core::geometry::StripMesh;
use chdbc_core::potentials::{PotentialKind, PotentialSpec, Regularization};
use chdbc_core::solver::{PotentialPair, SolverConfig};
use chdbc_core::velocity::VelocityField;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub potentials: PotentialsConfig,
    pub viscosity: ViscosityConfig,
    #[serde(default)]
    pub velocity: VelocityConfig,
    pub initial: InitialConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub tolerances: TolerancesConfig,
    #[serde(default)]
    pub stationary: StationaryConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialsConfig {
    pub bulk: PotentialConfig,
    pub surface: PotentialConfig,
    /// Yosida parameter; `0` evaluates smooth potentials exactly.
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Regular,
    Logarithmic { c1: f64 },
    DoubleObstacle { c2: f64 },
    Polynomial { coeffs: Vec<f64> },
}

impl PotentialConfig {
    pub fn to_spec(&self) -> chdbc_core::Result<PotentialSpec> {
        PotentialSpec::new(match self {
            PotentialConfig::Regular => PotentialKind::Regular,
            PotentialConfig::Logarithmic { c1 } => PotentialKind::Logarithmic { c1: *c1 },
            PotentialConfig::DoubleObstacle { c2 } => PotentialKind::DoubleObstacle { c2: *c2 },
            PotentialConfig::Polynomial { coeffs } => PotentialKind::Polynomial { coeffs: coeffs.clone() },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViscosityConfig {
    pub tau_omega: f64,
    pub tau_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityConfig {
    #[default]
    Zero,
    DecayingShear {
        a0: f64,
        lambda: f64,
        #[serde(default = "one")]
        k: u32,
    },
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// `m0` plus seeded uniform noise.
    Noise { m0: f64, amplitude: f64, seed: u64 },
    /// Layers in `y` joined by a tanh interface.
    Tanh { m0: f64, amplitude: f64, width: f64 },
    /// `rho` of a checkpoint file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub sample_interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolerancesConfig {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_tol: f64,
    pub max_halvings: u32,
    pub stationary_tol: f64,
    pub tol_dist: f64,
    pub tol_flat: f64,
    pub staleness: f64,
}

impl Default for TolerancesConfig {
    fn default() -> Self {
        let o = OmegaTolerances::default();
        Self {
            newton_tol: 1e-10,
            newton_max_iter: 50,
            linear_tol: 1e-12,
            max_halvings: 10,
            stationary_tol: 1e-10,
            tol_dist: o.tol_dist,
            tol_flat: o.tol_flat,
            staleness: o.staleness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuessKind {
    #[default]
    Constant,
    /// The configured initial data.
    Initial,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationaryConfig {
    /// Defaults to the mean of the initial data.
    pub m0: Option<f64>,
    pub guess: GuessKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Eps,
    Dt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {reason}"))
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be strictly positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Checks every field that the core would otherwise reject later.
    pub fn validate(&self) -> Result<(), CliError> {
        self.mesh()?;
        positive("viscosity.tau_omega", self.viscosity.tau_omega)?;
        positive("viscosity.tau_gamma", self.viscosity.tau_gamma)?;
        positive("time.dt", self.time.dt)?;
        if !(self.time.t_end >= 0.0 && self.time.t_end.is_finite()) {
            return Err(invalid("time.t_end", format!("must be nonnegative, got {}", self.time.t_end)));
        }
        if !(self.time.sample_interval >= 0.0) {
            return Err(invalid("time.sample_interval", "must be nonnegative"));
        }
        if !(self.potentials.eps >= 0.0 && self.potentials.eps.is_finite()) {
            return Err(invalid("potentials.eps", format!("must be nonnegative, got {}", self.potentials.eps)));
        }
        let pots = self.potentials()?;
        pots.check_admissible(self.regularization()?).map_err(|e| invalid("potentials.eps", e))?;
        positive("tolerances.newton_tol", self.tolerances.newton_tol)?;
        positive("tolerances.linear_tol", self.tolerances.linear_tol)?;
        positive("tolerances.stationary_tol", self.tolerances.stationary_tol)?;
        positive("tolerances.tol_dist", self.tolerances.tol_dist)?;
        positive("tolerances.tol_flat", self.tolerances.tol_flat)?;
        positive("tolerances.staleness", self.tolerances.staleness)?;
        if self.tolerances.newton_max_iter == 0 {
            return Err(invalid("tolerances.newton_max_iter", "must be at least 1"));
        }
        self.velocity()?;
        match &self.initial {
            InitialConfig::Noise { amplitude, .. } if !(*amplitude >= 0.0) => {
                return Err(invalid("initial.amplitude", "must be nonnegative"));
            }
            InitialConfig::Tanh { width, .. } => positive("initial.width", *width)?,
            _ => {}
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(invalid("sweep.values", "must not be empty"));
            }
            for v in &sweep.values {
                match sweep.parameter {
                    SweepParameter::Dt => positive("sweep.values", *v)?,
                    SweepParameter::Eps => {
                        if !(*v >= 0.0) {
                            return Err(invalid("sweep.values", format!("eps must be nonnegative, got {v}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<StripMesh, CliError> {
        let g = &self.geometry;
        StripMesh::new(g.nx, g.ny, g.lx, g.ly).map_err(|e| invalid("geometry", e))
    }

    pub fn potentials(&self) -> Result<PotentialPair, CliError> {
        let bulk = self.potentials.bulk.to_spec().map_err(|e| invalid("potentials.bulk", e))?;
        let surface = self.potentials.surface.to_spec().map_err(|e| invalid("potentials.surface", e))?;
        Ok(PotentialPair::new(bulk, surface))
    }

    pub fn regularization(&self) -> Result<Regularization, CliError> {
        Regularization::from_eps(self.potentials.eps).map_err(|e| invalid("potentials.eps", e))
    }

    pub fn velocity(&self) -> Result<VelocityField, CliError> {
        match self.velocity {
            VelocityConfig::Zero => Ok(VelocityField::Zero),
            VelocityConfig::DecayingShear { a0, lambda, k } => {
                VelocityField::decaying_shear(a0, lambda, k, &self.mesh()?).map_err(|e| invalid("velocity", e))
            }
        }
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let t = &self.tolerances;
        let mut cfg = SolverConfig::new(
            self.viscosity.tau_omega,
            self.viscosity.tau_gamma,
            self.time.dt,
            self.time.t_end,
            self.potentials.eps,
        )
        .map_err(|e| invalid("solver", e))?;
        cfg.newton_tol = t.newton_tol;
        cfg.newton_max_iter = t.newton_max_iter;
        cfg.linear_tol = t.linear_tol;
        cfg.max_halvings = t.max_halvings;
        cfg.sample_interval = self.time.sample_interval;
        cfg.validate().map_err(|e| invalid("tolerances", e))?;
        Ok(cfg)
    }

    pub fn omega_tolerances(&self) -> OmegaTolerances {
        OmegaTolerances {
            tol_dist: self.tolerances.tol_dist,
            tol_flat: self.tolerances.tol_flat,
            staleness: self.tolerances.staleness,
        }
    }

    /// Replaces the noise seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let InitialConfig::Noise { seed: s, .. } = &mut self.initial {
            *s = seed;
        }
        self
    }
}
