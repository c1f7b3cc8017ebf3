use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::model::{Hyperparams, ValenceMode};
use crate::preprocess::PreprocessConfig;

/// Shortest analysis window; HRV statistics need 20 s of pulse data.
pub const MIN_WINDOW_SECONDS: f64 = 20.0;

/// Engine settings, read from a TOML file. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub window_seconds: f64,
    pub hop_seconds: f64,
    pub capacity_seconds: f64,
    pub valence_mode: ValenceMode,
    pub fusion: FusionConfig,
    pub filters: PreprocessConfig,
    pub hyperparams: Hyperparams,
    /// Model directory; the CLI `--models` flag overrides it.
    pub models: Option<PathBuf>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            window_seconds: 20.0,
            hop_seconds: 5.0,
            capacity_seconds: 30.0,
            valence_mode: ValenceMode::default(),
            fusion: FusionConfig::default(),
            filters: PreprocessConfig::default(),
            hyperparams: Hyperparams::default(),
            models: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.window_seconds, self.hop_seconds, self.capacity_seconds]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("window, hop and capacity must be finite".into()));
        }
        if self.window_seconds < MIN_WINDOW_SECONDS {
            return Err(Error::Config(format!(
                "window_seconds must be >= {MIN_WINDOW_SECONDS}, got {}",
                self.window_seconds
            )));
        }
        if !(self.hop_seconds > 0.0 && self.hop_seconds <= self.window_seconds) {
            return Err(Error::Config(format!(
                "hop_seconds must be in (0, window_seconds], got {}",
                self.hop_seconds
            )));
        }
        if self.capacity_seconds < self.window_seconds {
            return Err(Error::Config(format!(
                "capacity_seconds ({}) must cover the window ({})",
                self.capacity_seconds, self.window_seconds
            )));
        }
        self.fusion.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: EngineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}
