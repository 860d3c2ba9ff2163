//! Synthetic dataset generation, persistence and train/test splits.

mod generate;
mod manifest;

use std::path::PathBuf;

use ndarray::ArrayD;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mesh::{Axis, MeshError};
use crate::physics::PhysicsError;

pub use generate::{farthest_point_sampling, generate_dataset, DataConfig, Generator, SampleSpec};
pub use manifest::{load_samples, DatasetManifest, Failure, MANIFEST_FILE};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("invalid data configuration: {0}")]
    InvalidConfig(String),
    #[error("sample {id}: checksum mismatch for {field}")]
    Checksum { id: String, field: &'static str },
    #[error("sample {id}: {field} has shape {found:?}, expected {expected:?}")]
    Shape {
        id: String,
        field: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

impl DataError {
    pub fn is_validation(&self) -> bool {
        !matches!(self, DataError::Io { .. } | DataError::Physics(PhysicsError::Unstable { .. }))
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| DataError::Io { path, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Provenance of one sample as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleMeta {
    pub id: String,
    /// index into the manifest's origin list
    pub origin: usize,
    /// index into the manifest's scar list
    pub scar: usize,
    pub axis: Axis,
    pub degrees: f64,
    pub seed: u64,
    pub split: Split,
    pub x_sha256: String,
    pub y_sha256: String,
}

/// Heart signal `x` `(heart, 1, T)` with its noisy torso projection `y` `(torso, 1, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub meta: SampleMeta,
    pub x: ArrayD<T>,
    pub y: ArrayD<T>,
}

/// Stable 64-bit seed derived from a base seed and a textual key.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
