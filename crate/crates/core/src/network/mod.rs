//! The encoder / bipartite inverse map / decoder network built from
//! spatial-temporal graph convolution blocks.

mod config;
mod geometry;
mod model;
mod params;
mod suite;

use thiserror::Error;

use crate::diff::DiffError;
use crate::mesh::MeshError;
use crate::spline::BasisError;

pub use config::{BlockConfig, MixerConfig, ModelConfig, ParamSpec};
pub use geometry::{toy_geometry, GeometryBundle, GeometrySet};
pub use model::{st_gcnn_block, BlockVars, BoundParams, Model, Stage};
pub use params::ModelParams;
pub use suite::{gradient_suite, SuiteEntry, SUITE_STEP, SUITE_TOLERANCE};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("{which} hierarchy has {levels} levels but the model has {blocks} blocks for it")]
    HierarchyMismatch {
        which: &'static str,
        levels: usize,
        blocks: usize,
    },
    #[error("{stage}: expected {expected} nodes, found {found}")]
    NodeMismatch {
        stage: String,
        expected: usize,
        found: usize,
    },
    #[error("parameters do not match the configuration: {0}")]
    Parameters(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}
