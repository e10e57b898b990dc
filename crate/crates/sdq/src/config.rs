//! Experiment configuration: JSON schema, validation, and model assembly.
//!
//! Models are structured, so they live in the config file; only run-scale
//! knobs (`--events`, `--seed`, ...) are overridable from the command line.
//! Validation errors name the offending field.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::palm;
use crate::primitives::{PrimitivesError, RenewalKind, RenewalSpec};
use crate::profile::{ProfileError, RegionRates, Representation, ScaledSystem, SpeedProfile};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("model: {0}")]
    Profile(#[from] ProfileError),
    #[error("{field}: {source}")]
    Primitive {
        field: String,
        source: PrimitivesError,
    },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Speed-profile description as it appears in the config file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelConfig {
    #[serde(default)]
    pub levels: Vec<f64>,
    pub regions: Vec<RegionRates>,
    #[serde(default)]
    pub representation: Representation,
}

impl ModelConfig {
    pub fn build(&self) -> Result<SpeedProfile, ConfigError> {
        Ok(SpeedProfile::new(
            self.levels.clone(),
            self.regions.clone(),
            self.representation,
        )?)
    }
}

fn default_burn_in() -> f64 {
    0.1
}

fn default_replications() -> u32 {
    1
}

fn default_events() -> u64 {
    1_000_000
}

fn default_outputs() -> String {
    "out".to_string()
}

/// Full experiment description. The model fields (`levels`, `regions`,
/// `representation`) sit at the top level of the JSON document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    pub arrival: RenewalKind,
    pub service: RenewalKind,
    pub n_list: Vec<u64>,
    #[serde(default = "default_events")]
    pub events: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: u32,
    /// Scaled probe levels; defaults to the standard layout for the profile.
    #[serde(default)]
    pub probes: Vec<f64>,
    #[serde(default = "default_outputs")]
    pub outputs: String,
    /// Arguments for the `clocks` command.
    #[serde(default)]
    pub theta_grid: Vec<f64>,
    /// Arguments for the `fluid` command.
    #[serde(default)]
    pub fluid: Option<FluidConfig>,
    /// Arguments for the `diffusion` command.
    #[serde(default)]
    pub diffusion: Option<DiffusionConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FluidConfig {
    pub y: f64,
    pub t_grid: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DiffusionConfig {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_steps")]
    pub steps: u64,
    /// Defaults to 10% of `steps`.
    #[serde(default)]
    pub burn_in: Option<u64>,
}

fn default_delta() -> f64 {
    1e-3
}

fn default_steps() -> u64 {
    1_000_000
}

impl ExperimentConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_list.is_empty() {
            return Err(invalid("n_list", "must be nonempty"));
        }
        if self.n_list.contains(&0) {
            return Err(invalid("n_list", "entries must be >= 1"));
        }
        if self.events < 10_000 {
            return Err(invalid("events", "must be >= 10000"));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(invalid("burn_in_fraction", "must lie in [0, 1)"));
        }
        if self.replications < 1 {
            return Err(invalid("replications", "must be >= 1"));
        }
        if self.probes.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("probes", "entries must be finite and >= 0"));
        }
        if let Some(f) = &self.fluid {
            if f.y <= 0.0 {
                return Err(invalid("fluid.y", "must be positive"));
            }
            if f.t_grid.is_empty() {
                return Err(invalid("fluid.t_grid", "must be nonempty"));
            }
        }
        if let Some(d) = &self.diffusion {
            if d.delta <= 0.0 {
                return Err(invalid("diffusion.delta", "must be positive"));
            }
        }
        self.model.build().map(|_| ())?;
        self.arrival_spec()?;
        self.service_spec()?;
        Ok(())
    }

    pub fn arrival_spec(&self) -> Result<RenewalSpec, ConfigError> {
        RenewalSpec::new(self.arrival).map_err(|source| ConfigError::Primitive {
            field: "arrival".to_string(),
            source,
        })
    }

    pub fn service_spec(&self) -> Result<RenewalSpec, ConfigError> {
        RenewalSpec::new(self.service).map_err(|source| ConfigError::Primitive {
            field: "service".to_string(),
            source,
        })
    }

    /// Probe levels, falling back to the default layout.
    pub fn effective_probes(&self, profile: &SpeedProfile) -> Vec<f64> {
        if self.probes.is_empty() {
            palm::default_probes(profile)
        } else {
            self.probes.clone()
        }
    }

    /// Assembles the `n`-th system.
    pub fn system(&self, n: u64) -> Result<ScaledSystem, ConfigError> {
        let profile = self.model.build()?;
        Ok(ScaledSystem::new(
            n,
            profile,
            self.arrival_spec()?,
            self.service_spec()?,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> &'static str {
        r#"{
            "levels": [1.0],
            "regions": [
                {"lambda": 1, "mu": 1, "lambda_star": 0, "mu_star": 1},
                {"lambda": 2, "mu": 2, "lambda_star": 0, "mu_star": 2}
            ],
            "arrival": {"kind": "exponential"},
            "service": {"kind": "erlang", "k": 2},
            "n_list": [100],
            "events": 50000,
            "seed": 7
        }"#
    }

    #[test]
    fn parses_and_validates() {
        let config: ExperimentConfig = serde_json::from_str(minimal_json()).unwrap();
        config.validate().unwrap();
        assert_eq!(config.burn_in_fraction, 0.1);
        assert_eq!(config.replications, 1);
        let sys = config.system(100).unwrap();
        assert_eq!(sys.speeds_at(11), (2.0, 2.2));
    }

    #[test]
    fn round_trip_is_identity() {
        let config: ExperimentConfig = serde_json::from_str(minimal_json()).unwrap();
        let text = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn validation_names_offending_field() {
        let mut config: ExperimentConfig = serde_json::from_str(minimal_json()).unwrap();
        config.n_list.clear();
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("n_list"), "{err}");

        let mut config: ExperimentConfig = serde_json::from_str(minimal_json()).unwrap();
        config.events = 100;
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("events"), "{err}");

        let mut config: ExperimentConfig = serde_json::from_str(minimal_json()).unwrap();
        config.arrival = RenewalKind::Uniform { half_width: 2.0 };
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("arrival"), "{err}");
    }

    #[test]
    fn default_probes_used_when_absent() {
        let config: ExperimentConfig = serde_json::from_str(minimal_json()).unwrap();
        let profile = config.model.build().unwrap();
        let probes = config.effective_probes(&profile);
        assert!(probes.contains(&0.5));
        assert!(probes.contains(&1.0));
    }
}
