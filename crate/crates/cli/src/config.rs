//! Run configuration, read from TOML or from the `config` echo in a manifest.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ffprep::protocol::ProtocolConfig;
use serde::{Deserialize, Serialize};

use crate::registry::ModelSpec;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_trajectories: usize,
    pub master_seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { n_trajectories: 100, master_seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub fit_late_rate: bool,
    pub fit_early_exponent: bool,
    /// Overrides the model's β = d/z for rate units.
    pub beta: Option<f64>,
    pub target_infidelity: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { fit_late_rate: true, fit_early_exponent: true, beta: None, target_infidelity: Some(0.2) }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("ffprep-out"), formats: vec![Format::Csv] }
    }
}

impl RunConfig {
    /// Reads TOML, or a manifest's `config` echo when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            let mut v: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let inner = v.get_mut("config").map(serde_json::Value::take).unwrap_or(v);
            serde_json::from_value(inner).with_context(|| format!("{}: invalid configuration", path.display()))?
        } else {
            toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate().context("protocol")?;
        if self.ensemble.n_trajectories == 0 {
            bail!("ensemble.n_trajectories must be at least 1");
        }
        if self.output.formats.is_empty() {
            bail!("output.formats is empty");
        }
        if let Some(t) = self.analysis.target_infidelity {
            if !(t > 0.0 && t < 1.0) {
                bail!("analysis.target_infidelity must lie in (0, 1), got {t}");
            }
        }
        Ok(())
    }
}
