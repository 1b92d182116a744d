use std::path::{Path, PathBuf};

use ngmc_core::{GaParams, McsTable, ModelConfig, SeRegression, SimConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Effective configuration: built-in defaults, then the `--config` file,
/// then command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    pub regression: SeRegression,
    pub ga: GaParams,
    pub sim: SimConfig,
    /// MCS ladder for quantized link mode; the bundled one when absent.
    pub mcs_table: Option<PathBuf>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.model.validate().map_err(|e| e.to_string())?;
        cfg.regression.validate().map_err(|e| e.to_string())?;
        cfg.ga.validate().map_err(|e| e.to_string())?;
        cfg.sim.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.ga.seed = s;
            self.sim.seed = s;
        }
    }

    pub fn mcs_table(&self) -> Result<McsTable, CliError> {
        match &self.mcs_table {
            None => Ok(McsTable::reference()),
            Some(p) => {
                McsTable::load(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
            }
        }
    }
}
