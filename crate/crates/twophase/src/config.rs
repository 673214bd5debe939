//! Experiment configuration: a flat, human-editable document (TOML or JSON)
//! describing the model and run parameters, with a stable content hash for
//! provenance stamping of every output file.

use crate::model::{DownCrossing, DriftFunction, ModelError, ScaleData, TwoPhaseModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse failure: {0}")]
    Parse(String),
    #[error("scale file {path}: {message}")]
    ScaleFile { path: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriftConfig {
    Constant { value: f64 },
    IteratedLog { x_min: f64, terms: Vec<(u32, f64)>, below: f64 },
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
    /// A drift backed by a scale function stored as JSON (as written by the
    /// drift generator).
    FromScaleFile { path: String },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GammaConfig {
    Constant { value: f64 },
    IteratedLog { x_min: f64, coef2: f64, coef3: f64, below: f64 },
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

fn default_a() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelConfig {
    pub bt: DriftConfig,
    pub br: DriftConfig,
    pub gamma: GammaConfig,
    #[serde(default = "default_a")]
    pub a: f64,
    pub x0: f64,
    /// Defaults to x0 - gamma(x0) - 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_horizon() -> f64 {
    100.0
}
fn default_replicates() -> usize {
    100
}
fn default_chain_length() -> usize {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_chain_length")]
    pub chain_length: usize,
    /// Probe offsets y for the onset-tail table.
    #[serde(default)]
    pub probes: Vec<f64>,
    #[serde(default)]
    pub bridge_correction: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hitting_z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hitting_c: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dt: default_dt(),
            horizon: default_horizon(),
            replicates: default_replicates(),
            chain_length: default_chain_length(),
            probes: Vec::new(),
            bridge_correction: false,
            hitting_z: None,
            hitting_c: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// Accepts JSON or TOML.
    pub fn parse_str(s: &str) -> Result<Self, ConfigError> {
        match serde_json::from_str::<ExperimentConfig>(s) {
            Ok(c) => Ok(c),
            Err(json_err) => toml::from_str::<ExperimentConfig>(s).map_err(|toml_err| {
                ConfigError::Parse(format!(
                    "neither JSON ({json_err}) nor TOML ({toml_err})"
                ))
            }),
        }
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Builds the model instance; scale-file references resolve against
    /// `base_dir`.
    pub fn to_model(&self, base_dir: &Path) -> Result<TwoPhaseModel, ConfigError> {
        let bt = drift_from(&self.model.bt, base_dir)?;
        let br = drift_from(&self.model.br, base_dir)?;
        let gamma = match &self.model.gamma {
            GammaConfig::Constant { value } => DownCrossing::Constant(*value),
            GammaConfig::IteratedLog { x_min, coef2, coef3, below } => DownCrossing::IteratedLog {
                x_min: *x_min,
                coef2: *coef2,
                coef3: *coef3,
                below: *below,
            },
            GammaConfig::Tabulated { grid, values } => DownCrossing::Tabulated {
                grid: grid.clone(),
                values: values.clone(),
            },
        };
        let mut m = TwoPhaseModel::new(bt, br, gamma, self.model.a, self.model.x0);
        if let Some(z0) = self.model.z0 {
            m = m.with_z0(z0);
        }
        Ok(m)
    }
}

fn drift_from(c: &DriftConfig, base_dir: &Path) -> Result<DriftFunction, ConfigError> {
    Ok(match c {
        DriftConfig::Constant { value } => DriftFunction::Constant(*value),
        DriftConfig::IteratedLog { x_min, terms, below } => DriftFunction::IteratedLog {
            x_min: *x_min,
            terms: terms.clone(),
            below: *below,
        },
        DriftConfig::Tabulated { grid, values } => DriftFunction::Tabulated {
            grid: grid.clone(),
            values: values.clone(),
        },
        DriftConfig::FromScaleFile { path } => {
            let full = base_dir.join(path);
            let text = std::fs::read_to_string(&full).map_err(|e| ConfigError::ScaleFile {
                path: full.display().to_string(),
                message: e.to_string(),
            })?;
            let scale: ScaleData =
                serde_json::from_str(&text).map_err(|e| ConfigError::ScaleFile {
                    path: full.display().to_string(),
                    message: e.to_string(),
                })?;
            DriftFunction::FromScale(scale)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML_EXAMPLE: &str = r#"
seed = 7

[model]
x0 = 0.0

[model.bt]
kind = "constant"
value = 1.0

[model.br]
kind = "constant"
value = 0.0

[model.gamma]
kind = "constant"
value = 1.0

[run]
dt = 0.001
horizon = 50.0
"#;

    #[test]
    fn parses_toml_and_builds_model() {
        let cfg = ExperimentConfig::parse_str(TOML_EXAMPLE).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.run.dt, 0.001);
        let m = cfg.to_model(Path::new(".")).unwrap();
        assert_eq!(m.z0, -2.0);
        assert!(crate::model::validate_model(&m).unwrap().is_valid());
    }

    #[test]
    fn json_round_trip_preserves_hash() {
        let cfg = ExperimentConfig::parse_str(TOML_EXAMPLE).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let cfg2 = ExperimentConfig::parse_str(&json).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(cfg.hash(), cfg2.hash());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ExperimentConfig::parse_str(TOML_EXAMPLE).unwrap();
        let mut b = a.clone();
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
    }
}
