//! Reconstruction metrics, activation analysis, scar identification and the
//! generalization experiments.

mod activation;
mod harness;
mod metrics;
mod report;

use thiserror::Error;

use crate::data::DataError;
use crate::network::NetworkError;
use crate::train::TrainError;

pub use activation::{
    activation_metrics, default_duration_threshold, dice, scar_identify, ActivationMetrics, ScarResult,
    ACTIVATION_LEVEL,
};
pub use harness::{cross_geometry_eval, evaluate, rotation_sweep, EvalConfig};
pub use metrics::{cc_metric, mse_metric};
pub use report::{GroupSummary, MetricReport, SampleMetrics};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("metric inputs differ in shape: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("correlation undefined: {0} has zero variance")]
    ZeroVariance(&'static str),
    #[error("checkpoint was trained on geometry {expected}, this geometry is {found}")]
    GeometryMismatch { expected: String, found: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
}
