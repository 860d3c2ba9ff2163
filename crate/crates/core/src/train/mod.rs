//! Adam optimization, the training loop and checkpoints.

mod adam;
mod checkpoint;
mod trainer;

use thiserror::Error;

use crate::network::NetworkError;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, EpochRecord, CHECKPOINT_MAGIC};
pub use trainer::{train, write_history_csv, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite gradient in parameter {name} at step {step}")]
    NonFiniteGradient { name: String, step: u64 },
    #[error("loss became non-finite in epoch {epoch}; last good checkpoint kept")]
    Diverged { epoch: usize },
    #[error("training needs at least one sample")]
    EmptyDataset,
    #[error("no geometry prepared for rotation {axis} {degrees} degrees")]
    MissingGeometry { axis: crate::mesh::Axis, degrees: f64 },
    #[error("checkpoint geometry {found} does not match {expected}")]
    GeometryMismatch { expected: String, found: String },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}
