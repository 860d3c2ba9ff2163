use thiserror::Error;

use crate::config::ConfigError;
use crate::data::DataError;
use crate::diff::DiffError;
use crate::eval::EvalError;
use crate::mesh::MeshError;
use crate::network::NetworkError;
use crate::physics::PhysicsError;
use crate::train::TrainError;

/// Crate-level error; each module reports through its own enum.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by invalid input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Mesh(e) => !matches!(e, MeshError::Io(_)),
            Error::Config(_) => true,
            Error::Data(e) => e.is_validation(),
            Error::Eval(EvalError::GeometryMismatch { .. } | EvalError::ShapeMismatch { .. }) => true,
            Error::Eval(EvalError::Train(e)) | Error::Train(e) => matches!(
                e,
                TrainError::GeometryMismatch { .. }
                    | TrainError::InvalidConfig(_)
                    | TrainError::Corrupt(_)
                    | TrainError::EmptyDataset
                    | TrainError::MissingGeometry { .. }
            ),
            Error::Network(e) => !matches!(e, NetworkError::Diff(_)),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
