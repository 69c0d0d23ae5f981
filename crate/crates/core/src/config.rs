//! JSON run configuration shared by the command-line tools.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::angle::AngleSearch;
use crate::error::{Result, UdgError};
use crate::eval::SweepGrid;
use crate::solver::UdgParams;
use crate::synth::{BlendMode, RainSpec};
use crate::tile::Tiling;

/// Where a sweep gets its samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Procedural scenes with synthetic rain drawn from the config's
    /// `rain` spec.
    Procedural {
        count: usize,
        #[serde(default = "default_size")]
        size: usize,
        #[serde(default)]
        seed: u64,
        /// Per-image angle jitter around `rain.angle_degrees`.
        #[serde(default)]
        angle_spread_deg: f64,
    },
    /// A directory written by `udg synth`.
    Dir { path: PathBuf },
}

fn default_size() -> usize {
    128
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: UdgParams,
    pub search: AngleSearch,
    pub rain: RainSpec,
    pub blend: BlendMode,
    pub tiling: Tiling,
    pub grid: SweepGrid,
    pub dataset: Option<DatasetConfig>,
}

impl RunConfig {
    /// Parses a config file. Unreadable or malformed files are reported as
    /// configuration errors.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UdgError::param("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| UdgError::param("config", e.to_string()))
    }

    /// Checks every section; the first offending field is named in the error.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.search.validate()?;
        self.rain.validate()?;
        self.grid.validate()?;
        if let Tiling::Always(cfg) = self.tiling {
            cfg.validate()?;
        }
        match &self.dataset {
            Some(DatasetConfig::Procedural {
                size,
                angle_spread_deg,
                ..
            }) => {
                if *size < 32 {
                    return Err(UdgError::param("dataset.procedural.size", "must be >= 32"));
                }
                if !(0.0..=45.0).contains(angle_spread_deg) {
                    return Err(UdgError::param(
                        "dataset.procedural.angle_spread_deg",
                        "must be in [0, 45]",
                    ));
                }
            }
            Some(DatasetConfig::Dir { .. }) | None => {}
        }
        Ok(())
    }
}
