//! Run configuration, read from TOML.
//!
//! Every section is optional. Unknown keys are rejected. Model values left
//! out are resolved from `lambda` and `beta` the same way as
//! [`CycleSpec::from_central`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{build_model, CycleSpec, CycleSystem, StrongOffsets};
use crate::quotient::{CycleCentralData, Orientation};
use crate::tower::TowerConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {constraint}")]
    Invalid { key: String, constraint: String },
}

impl ConfigError {
    fn invalid(key: &str, constraint: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.to_string(), constraint: constraint.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub tau: Option<f64>,
    pub pi_a: Option<u32>,
    pub pi_b: Option<u32>,
    pub t_ab: Option<u32>,
    pub t_ba: Option<u32>,
    pub s_dim: Option<usize>,
    pub u_dim: Option<usize>,
    pub rho_s: Option<f64>,
    pub rho_u: Option<f64>,
    pub chart_radius: Option<f64>,
    pub chart_separation: Option<f64>,
    pub section6_regime: Option<bool>,
    pub strong_offsets: Option<StrongOffsets>,
}

impl ModelConfig {
    pub fn resolve(&self) -> CycleSpec {
        let d = CycleCentralData::default();
        let central = CycleCentralData {
            lambda: self.lambda.unwrap_or(d.lambda),
            beta: self.beta.unwrap_or(d.beta),
            tau: self.tau.unwrap_or(d.tau),
            pi_a: self.pi_a.unwrap_or(d.pi_a),
            pi_b: self.pi_b.unwrap_or(d.pi_b),
            t_ab: self.t_ab.unwrap_or(d.t_ab),
            t_ba: self.t_ba.unwrap_or(d.t_ba),
        };
        let base = CycleSpec::from_central(central);
        CycleSpec {
            central,
            s_dim: self.s_dim.unwrap_or(base.s_dim),
            u_dim: self.u_dim.unwrap_or(base.u_dim),
            rho_s: self.rho_s.unwrap_or(base.rho_s),
            rho_u: self.rho_u.unwrap_or(base.rho_u),
            chart_radius: self.chart_radius.unwrap_or(base.chart_radius),
            chart_separation: self.chart_separation.unwrap_or(base.chart_separation),
            strong_offsets: self.strong_offsets.clone().unwrap_or_default(),
            section6_regime: self.section6_regime.unwrap_or(base.section6_regime),
        }
    }

    /// The fully specified form of `spec`.
    pub fn from_spec(spec: &CycleSpec) -> Self {
        let c = &spec.central;
        Self {
            lambda: Some(c.lambda),
            beta: Some(c.beta),
            tau: Some(c.tau),
            pi_a: Some(c.pi_a),
            pi_b: Some(c.pi_b),
            t_ab: Some(c.t_ab),
            t_ba: Some(c.t_ba),
            s_dim: Some(spec.s_dim),
            u_dim: Some(spec.u_dim),
            rho_s: Some(spec.rho_s),
            rho_u: Some(spec.rho_u),
            chart_radius: Some(spec.chart_radius),
            chart_separation: Some(spec.chart_separation),
            section6_regime: Some(spec.section6_regime),
            strong_offsets: Some(spec.strong_offsets.clone()),
        }
    }
}

pub const DICTIONARY: [&str; 5] = ["one", "central", "a_phase", "b_phase", "central_log_derivative"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub eps: Vec<f64>,
    /// Names from the default dictionary.
    pub dictionary: Vec<String>,
    /// Support bounds are counted for `1 <= n <= support_max_n`.
    pub support_max_n: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            eps: vec![0.1],
            dictionary: DICTIONARY.iter().map(|s| s.to_string()).collect(),
            support_max_n: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorbdCase {
    /// Defaults to the model's `lambda`.
    #[serde(default)]
    pub lambda: Option<f64>,
    pub k: u64,
    pub p: u64,
    pub q: u64,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub l_min: u64,
    pub l_max: u64,
    pub m_min: u64,
    pub m_max: u64,
    pub corbd: Vec<CorbdCase>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        let case = |p, q, orientation| CorbdCase { lambda: Some(0.5), k: 4, p, q, orientation };
        Self {
            l_min: 1,
            l_max: 10,
            m_min: 1,
            m_max: 10,
            corbd: vec![case(2, 6, Orientation::Preserving), case(6, 2, Orientation::Reversing)],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub format: Format,
    pub path: Option<PathBuf>,
}

/// Parameter grids; an empty list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
    pub c: Vec<f64>,
    pub halving_ratio: Vec<f64>,
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Recorded in reports; every search is deterministic.
    pub seed: u64,
    pub model: ModelConfig,
    pub tower: TowerConfig,
    pub verify: VerifyConfig,
    pub solve: SolveConfig,
    pub output: OutputConfig,
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Resolves the model defaults in place, so reports echo every value.
    pub fn resolved(mut self) -> Self {
        self.model = ModelConfig::from_spec(&self.model.resolve());
        self
    }

    pub fn spec(&self) -> CycleSpec {
        self.model.resolve()
    }

    pub fn system(&self) -> Result<CycleSystem, ConfigError> {
        build_model(self.spec()).map_err(|e| ConfigError::invalid("model", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let sys = self.system()?;
        let chi_a = sys.central_data().chi_a();
        let t = &self.tower;
        if !(t.c > 16.0 / chi_a.abs()) {
            return Err(ConfigError::invalid(
                "tower.c",
                format!(
                    "C = {} must exceed 16/|ln(lambda)/pi_a| = {:.5}",
                    t.c,
                    16.0 / chi_a.abs()
                ),
            ));
        }
        if !(t.halving_ratio > 0.0 && t.halving_ratio < 1.0) {
            return Err(ConfigError::invalid("tower.halving_ratio", "must lie in (0, 1)"));
        }
        if let Err(e) = t.validate(&sys) {
            return Err(ConfigError::invalid("tower", e.to_string()));
        }
        for &eps in &self.verify.eps {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(ConfigError::invalid("verify.eps", format!("{eps} must lie in (0, 1)")));
            }
        }
        for name in &self.verify.dictionary {
            if !DICTIONARY.contains(&name.as_str()) {
                return Err(ConfigError::invalid(
                    "verify.dictionary",
                    format!("unknown function `{name}`; known: {}", DICTIONARY.join(", ")),
                ));
            }
        }
        for (i, case) in self.solve.corbd.iter().enumerate() {
            if case.k < 4 || case.k % 2 == 1 {
                return Err(ConfigError::invalid(
                    &format!("solve.corbd[{i}].k"),
                    "must be even and at least 4",
                ));
            }
            if case.p == 0 || case.q == 0 {
                return Err(ConfigError::invalid(&format!("solve.corbd[{i}]"), "p and q must be positive"));
            }
            if let Some(l) = case.lambda {
                if !(l > 0.0 && l < 1.0) {
                    return Err(ConfigError::invalid(
                        &format!("solve.corbd[{i}].lambda"),
                        "must lie in (0, 1)",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
    let config = RunConfig::from_toml(&text)?;
    config.validate()?;
    Ok(config)
}
