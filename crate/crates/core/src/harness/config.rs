//! Declarative experiment configuration.
//!
//! Everything is a plain TOML file with nested tables; every field has a
//! default matching the baseline simulation setup, so an empty file (or no
//! file at all) is a valid configuration. CLI flags override file values.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rate::FeasibleSet;

/// Control resolution: a bit count or the string `"continuous"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Bits(u32),
    Continuous(ContinuousTag),
}

/// The only accepted string form of a continuous resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ContinuousTag {
    #[serde(rename = "continuous")]
    Continuous,
}

impl Resolution {
    pub fn bits(&self) -> Option<u32> {
        match self {
            Resolution::Bits(b) => Some(*b),
            Resolution::Continuous(_) => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub k_users: usize,
    pub ap_antennas: usize,
    pub irs_elements: usize,
    /// Pilot count; defaults to `irs_elements + 1` when omitted.
    pub n_pilots: Option<usize>,
    /// Symbols per transmission frame, used by the training-overhead factor.
    pub frame_symbols: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { k_users: 1, ap_antennas: 4, irs_elements: 20, n_pilots: None, frame_symbols: 1000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    /// Downlink transmit power budget (dBm).
    pub p_dbm: f64,
    /// Uplink training power (dBm).
    pub p_u_dbm: f64,
    /// Downlink noise power (dBm).
    pub noise_dbm: f64,
    /// Uplink training noise power at the AP (dBm).
    pub training_noise_dbm: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { p_dbm: 26.0, p_u_dbm: 10.0, noise_dbm: -80.0, training_noise_dbm: -90.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReflectionConfig {
    pub q_a: Resolution,
    pub q_theta: Resolution,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        Self { q_a: Resolution::Bits(1), q_theta: Resolution::Bits(1) }
    }
}

impl ReflectionConfig {
    pub fn feasible_set(&self) -> FeasibleSet {
        FeasibleSet { q_a: self.q_a.bits(), q_theta: self.q_theta.bits() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub ap: [f64; 3],
    pub irs: [f64; 3],
    /// IRS elements along the y-axis; the z count is `irs_elements / irs_rows_y`.
    pub irs_rows_y: usize,
    pub cluster_center: [f64; 3],
    pub cluster_radius: f64,
    pub spacing_wavelengths: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            ap: [2.0, 0.0, 0.0],
            irs: [0.0, 45.0, 2.0],
            irs_rows_y: 4,
            cluster_center: [3.0, 45.0, 0.0],
            cluster_radius: 3.0,
            spacing_wavelengths: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossConfig {
    pub c0_db: f64,
    pub alpha_au: f64,
    pub alpha_ai: f64,
    pub alpha_iu: f64,
}

impl Default for PathLossConfig {
    fn default() -> Self {
        Self { c0_db: -30.0, alpha_au: 3.6, alpha_ai: 2.2, alpha_iu: 2.2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RicianConfig {
    /// Rician factor of the AP-IRS link in dB; omitted means Rayleigh.
    pub beta_ai_db: Option<f64>,
    pub beta_au_db: Option<f64>,
    pub beta_iu_db: Option<f64>,
}

impl Default for RicianConfig {
    fn default() -> Self {
        Self { beta_ai_db: Some(3.0), beta_au_db: None, beta_iu_db: None }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineFlags {
    pub no_irs: bool,
    pub nonrobust: bool,
    pub random_bcd: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub trials: usize,
    pub master_seed: u64,
    pub baselines: BaselineFlags,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self { trials: 50, master_seed: 1, baselines: BaselineFlags::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub values: Vec<f64>,
}

/// Penalty-loop tolerances shared by both solvers, overridable per solver
/// table in the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverTolerances {
    pub beta0: f64,
    pub shrink: f64,
    pub eps_d: f64,
    pub eps_p: f64,
    pub eps_c: f64,
    pub eps_in: f64,
    pub eps_out: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub max_sweeps: usize,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            beta0: 10.0,
            shrink: 0.6,
            eps_d: 1e-4,
            eps_p: 1e-4,
            eps_c: 1e-4,
            eps_in: 1e-4,
            eps_out: 1e-4,
            max_inner: 200,
            max_outer: 60,
            max_sweeps: 50,
        }
    }
}

impl SolverTolerances {
    pub fn su_config(&self) -> crate::solver_su::SuSolverConfig {
        crate::solver_su::SuSolverConfig {
            beta0: self.beta0,
            shrink: self.shrink,
            eps_d: self.eps_d,
            eps_p: self.eps_p,
            eps_c: self.eps_c,
            max_inner: self.max_inner,
            max_outer: self.max_outer,
            max_sweeps: self.max_sweeps,
            radius: None,
            init: crate::solver_su::SuInit::Ones,
        }
    }

    pub fn mu_config(&self, robust: bool) -> crate::solver_mu::MuSolverConfig {
        crate::solver_mu::MuSolverConfig {
            beta0: self.beta0,
            shrink: self.shrink,
            eps_in: self.eps_in,
            eps_out: self.eps_out,
            max_inner: self.max_inner,
            max_outer: self.max_outer,
            robust,
        }
    }
}

/// Sweepable parameter names.
pub const SWEEP_WHITELIST: [&str; 5] =
    ["p_u_dbm", "p_dbm", "irs_elements", "n_pilots", "k_users"];

/// Full experiment description.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub power: PowerConfig,
    pub reflection: ReflectionConfig,
    pub geometry: GeometryConfig,
    pub path_loss: PathLossConfig,
    pub rician: RicianConfig,
    pub experiment: ExperimentSection,
    pub sweep: Option<SweepConfig>,
    pub solver_su: SolverTolerances,
    pub solver_mu: SolverTolerances,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    /// Effective pilot count (`N + 1` unless configured).
    pub fn n_pilots(&self) -> usize {
        self.system.n_pilots.unwrap_or(self.system.irs_elements + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.system.irs_elements;
        if self.system.k_users == 0 {
            return Err(Error::Config("k_users must be at least 1".into()));
        }
        if self.system.ap_antennas == 0 {
            return Err(Error::Config("ap_antennas must be at least 1".into()));
        }
        if n == 0 {
            return Err(Error::Config("irs_elements must be at least 1".into()));
        }
        if self.geometry.irs_rows_y == 0 || n % self.geometry.irs_rows_y != 0 {
            return Err(Error::Config(format!(
                "irs_rows_y = {} must divide irs_elements = {n}",
                self.geometry.irs_rows_y
            )));
        }
        if self.n_pilots() < n + 1 {
            return Err(Error::Config(format!(
                "n_pilots = {} must be at least irs_elements + 1 = {}",
                self.n_pilots(),
                n + 1
            )));
        }
        if self.system.frame_symbols <= self.n_pilots() {
            return Err(Error::Config(format!(
                "frame_symbols = {} must exceed n_pilots = {}",
                self.system.frame_symbols,
                self.n_pilots()
            )));
        }
        if self.experiment.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.geometry.cluster_radius < 0.0 {
            return Err(Error::Config("cluster_radius must be nonnegative".into()));
        }
        if self.experiment.baselines.random_bcd && self.system.k_users != 1 {
            return Err(Error::Config(
                "the random_bcd baseline is defined for k_users = 1 only".into(),
            ));
        }
        if let Some(sweep) = &self.sweep {
            if !SWEEP_WHITELIST.contains(&sweep.parameter.as_str()) {
                return Err(Error::Config(format!(
                    "sweep parameter '{}' is not one of {:?}",
                    sweep.parameter, SWEEP_WHITELIST
                )));
            }
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep.values must not be empty".into()));
            }
        }
        Ok(())
    }

    /// Copy of the configuration with one swept parameter replaced.
    pub fn with_sweep_value(&self, parameter: &str, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = self.clone();
        let as_count = |value: f64, name: &str| -> Result<usize> {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(Error::Config(format!(
                    "sweep value {value} for '{name}' is not a nonnegative integer"
                )));
            }
            Ok(value as usize)
        };
        match parameter {
            "p_u_dbm" => cfg.power.p_u_dbm = value,
            "p_dbm" => cfg.power.p_dbm = value,
            "irs_elements" => cfg.system.irs_elements = as_count(value, parameter)?,
            "n_pilots" => cfg.system.n_pilots = Some(as_count(value, parameter)?),
            "k_users" => cfg.system.k_users = as_count(value, parameter)?,
            other => {
                return Err(Error::Config(format!("unknown sweep parameter '{other}'")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
