//! Settings file: every tunable of the engine and the simulator in one flat
//! TOML document. Missing keys take their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keyboard::DwellTiming;
use crate::sim::{TrackerParams, UserParams};
use crate::types::{validate_config, AutocalConfig, ConfigError, Millis, ScreenConfig};

pub const DEFAULT_SETTINGS_TOML: &str = include_str!("../data/default.toml");

#[derive(Debug, Error)]
pub enum SettingsError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Invalid(#[from] ConfigError),
    #[error("{0}")]
    InvalidSim(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionParams {
    /// A session still unfinished after this long counts as aborted.
    pub timeout_ms: Millis,
}

impl Default for SessionParams {
    fn default() -> Self {
        Self { timeout_ms: 120_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub screen: ScreenConfig,
    pub autocal: AutocalConfig,
    pub dwell: DwellTiming,
    pub tracker: TrackerParams,
    pub user: UserParams,
    pub session: SessionParams,
}

impl Settings {
    pub fn from_toml(s: &str) -> Result<Self, SettingsError> {
        let settings: Settings = toml::from_str(s)?;
        settings.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SettingsError> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path)
            .map_err(|source| SettingsError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&s)
    }

    pub fn validate(self) -> Result<Self, SettingsError> {
        validate_config(self.autocal, self.screen)?;
        self.user.validate().map_err(SettingsError::InvalidSim)?;
        self.tracker.validate().map_err(SettingsError::InvalidSim)?;
        if self.dwell.arm_ms < 0 || self.dwell.dwell_ms <= 0 || self.dwell.flash_ms < 0 {
            return Err(SettingsError::InvalidSim("dwell timings must be non-negative".into()));
        }
        if self.session.timeout_ms <= 0 {
            return Err(SettingsError::InvalidSim("timeout_ms must be positive".into()));
        }
        Ok(self)
    }
}
