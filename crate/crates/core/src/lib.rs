//! Geometry-dependent inverse reconstruction of spatiotemporal signals living on
//! triangulated surfaces.
//!
//! The crate covers the whole pipeline: mesh graphs and topology-preserving
//! hierarchies, a small reverse-mode differentiation engine, spline graph
//! convolutions, the encoder / bipartite inverse map / decoder network, a
//! synthetic Aliev-Panfilov data generator with a surrogate forward operator,
//! training with Adam, and the evaluation harness.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the double-precision instantiation used by the command line.

pub mod config;
pub mod data;
pub mod diff;
pub mod error;
pub mod eval;
pub mod mesh;
pub mod network;
pub mod physics;
pub mod scalar;
pub mod spline;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision signal tensor `(nodes, channels, time)`.
pub type Tensor = ndarray::ArrayD<f64>;
pub type Tape = diff::Tape<f64>;
pub type Model = network::Model<f64>;
pub type ModelParams = network::ModelParams<f64>;
pub type Geometry = network::GeometryBundle<f64>;
pub type Checkpoint = train::Checkpoint<f64>;
pub type Sample = data::Sample<f64>;
pub type ForwardOperator = physics::ForwardOperator<f64>;
