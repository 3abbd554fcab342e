//! Versioned TOML run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiments::SingleUserSetup;
use super::params::{MultiUserLayout, SystemParameters};
use crate::baselines::{RateConfig, SchemeId, SchemeSettings};
use crate::error::{Error, Result};
use crate::opt_ao::{AoConfig, InitPointing};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitChoice {
    #[default]
    AllE3,
    TowardStrongestUser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoSection {
    pub epsilon_converge: f64,
    pub max_outer_iters: usize,
    pub init: InitChoice,
}

impl Default for AoSection {
    fn default() -> Self {
        let d = AoConfig::default();
        Self {
            epsilon_converge: d.epsilon_converge,
            max_outer_iters: d.max_outer_iters,
            init: InitChoice::AllE3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub trials: Option<usize>,
    pub base_seed: Option<u64>,
    pub schemes: Option<Vec<String>>,
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayWiseSection {
    pub grid: usize,
}

impl Default for ArrayWiseSection {
    fn default() -> Self {
        Self {
            grid: crate::baselines::DEFAULT_ARRAY_GRID,
        }
    }
}

/// Top-level configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub system: SystemParameters,
    #[serde(default)]
    pub layout: MultiUserLayout,
    #[serde(default)]
    pub single_user: SingleUserSetup,
    #[serde(default)]
    pub ao: AoSection,
    #[serde(default)]
    pub array_wise: ArrayWiseSection,
    #[serde(default)]
    pub rate: RateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: ExperimentSection::default(),
            system: SystemParameters::default(),
            layout: MultiUserLayout::default(),
            single_user: SingleUserSetup::default(),
            ao: AoSection::default(),
            array_wise: ArrayWiseSection::default(),
            rate: RateConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.layout.validate()?;
        self.rate.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.ao_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.array_wise.grid < 2 {
            return Err(Error::Config("array_wise.grid must be at least 2".into()));
        }
        if let Some(s) = &self.experiment.schemes {
            parse_schemes(s)?;
        }
        if self.experiment.trials == Some(0) {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn ao_config(&self) -> AoConfig {
        AoConfig {
            epsilon_converge: self.ao.epsilon_converge,
            max_outer_iters: self.ao.max_outer_iters,
            init_pointing: match self.ao.init {
                InitChoice::AllE3 => InitPointing::AllE3,
                InitChoice::TowardStrongestUser => InitPointing::TowardStrongestUser,
            },
            ..AoConfig::default()
        }
    }

    pub fn scheme_settings(&self) -> SchemeSettings {
        SchemeSettings {
            ao: self.ao_config(),
            array_grid: self.array_wise.grid,
        }
    }
}

pub fn parse_schemes<S: AsRef<str>>(names: &[S]) -> Result<Vec<SchemeId>> {
    if names.is_empty() {
        return Err(Error::Config("scheme list is empty".into()));
    }
    names.iter().map(|s| s.as_ref().trim().parse()).collect()
}
