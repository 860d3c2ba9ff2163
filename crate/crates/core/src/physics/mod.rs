//! Synthetic ground truth: Aliev-Panfilov excitation on the heart surface, a
//! normalized inverse-distance forward operator and measurement noise.

mod ap;
mod forward;
mod scar;

use thiserror::Error;

pub use ap::{simulate_ap, simulate_ap_graph, single_cell_trace, APParams, Laplacian};
pub use forward::{add_noise, apply_forward, signal_power, ForwardOperator};
pub use scar::{geodesic_distances, ScarMap};

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("simulation unstable at step {step}, vertex {vertex} (u = {value}); parameters {params}")]
    Unstable {
        step: usize,
        vertex: usize,
        value: f64,
        params: String,
    },
    #[error("stimulus origin {origin} lies inside the scar")]
    OriginInScar { origin: usize },
    #[error("vertex {vertex} out of range for {num_vertices} vertices")]
    VertexOutOfRange { vertex: usize, num_vertices: usize },
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
    #[error("scar region is not connected")]
    DisconnectedScar,
    #[error("torso vertex {torso} coincides with heart vertex {heart}")]
    Coincident { torso: usize, heart: usize },
    #[error("forward operator expects {expected} heart nodes with one channel, got shape {found:?}")]
    ShapeMismatch { expected: usize, found: Vec<usize> },
    #[error("cannot add noise at a given SNR to a zero-power signal")]
    ZeroPower,
}
