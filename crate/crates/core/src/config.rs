//! Run configuration shared by every command: one TOML file with a section
//! per module. Unknown keys are rejected and relative paths are resolved
//! against the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataConfig;
use crate::eval::EvalConfig;
use crate::network::ModelConfig;
use crate::physics::APParams;
use crate::train::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// A heart/torso mesh pair and the vertex counts of their coarser levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub heart: PathBuf,
    pub torso: PathBuf,
    pub heart_targets: Vec<usize>,
    pub torso_targets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// output directory; the `--out` flag takes precedence
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// dataset directory; defaults to `<out_dir>/data`
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    pub geometry: GeometryConfig,
    /// second mesh pair for the cross-geometry experiment
    #[serde(default)]
    pub cross_geometry: Option<GeometryConfig>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub physics: APParams,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Reads, resolves relative paths against the file's directory and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let base = std::path::absolute(&base).unwrap_or(base);
        config.resolve_paths(&base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for g in std::iter::once(&mut self.geometry).chain(self.cross_geometry.as_mut()) {
            resolve(base, &mut g.heart);
            resolve(base, &mut g.torso);
        }
        for p in [&mut self.out_dir, &mut self.dataset].into_iter().flatten() {
            resolve(base, p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.physics.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.data.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.data.frames != self.model.time_len {
            return Err(ConfigError::Invalid(format!(
                "data.frames ({}) must equal model.time_len ({})",
                self.data.frames, self.model.time_len
            )));
        }
        for (name, g) in std::iter::once(("geometry", &self.geometry)).chain(self.cross_geometry.iter().map(|g| ("cross_geometry", g))) {
            if g.heart_targets.len() != self.model.decoder.len() {
                return Err(ConfigError::Invalid(format!(
                    "{name}.heart_targets needs one entry per decoder block ({})",
                    self.model.decoder.len()
                )));
            }
            if g.torso_targets.len() != self.model.encoder.len() {
                return Err(ConfigError::Invalid(format!(
                    "{name}.torso_targets needs one entry per encoder block ({})",
                    self.model.encoder.len()
                )));
            }
        }
        if self.train.batch_size == 0 {
            return Err(ConfigError::Invalid("train.batch_size must be positive".into()));
        }
        Ok(())
    }

    /// Dataset directory, given the resolved output directory.
    pub fn dataset_dir(&self, out_dir: &Path) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| out_dir.join("data"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
