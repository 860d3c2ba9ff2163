use std::collections::BTreeMap;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::{ModelConfig, NetworkError};
use crate::mesh::{build_bipartite, format_mesh, Axis, MeshHierarchy, PoolingMap, TriMesh};
use crate::spline::EdgeBasis;
use crate::Scalar;

/// Heart and torso hierarchies with every graph operator the model needs,
/// precomputed for one spline configuration.
#[derive(Debug, Clone)]
pub struct GeometryBundle<T> {
    heart: MeshHierarchy,
    torso: MeshHierarchy,
    pub(crate) heart_bases: Vec<Arc<EdgeBasis<T>>>,
    pub(crate) torso_bases: Vec<Arc<EdgeBasis<T>>>,
    pub(crate) heart_pools: Vec<Arc<PoolingMap>>,
    pub(crate) torso_pools: Vec<Arc<PoolingMap>>,
    pub(crate) bipartite: Arc<EdgeBasis<T>>,
    hash: String,
}

impl<T: Scalar> GeometryBundle<T> {
    pub fn new(heart: MeshHierarchy, torso: MeshHierarchy, config: &ModelConfig) -> Result<Self, NetworkError> {
        config.validate()?;
        if torso.num_levels() != config.encoder.len() + 1 {
            return Err(NetworkError::HierarchyMismatch {
                which: "torso",
                levels: torso.num_levels(),
                blocks: config.encoder.len(),
            });
        }
        if heart.num_levels() != config.decoder.len() + 1 {
            return Err(NetworkError::HierarchyMismatch {
                which: "heart",
                levels: heart.num_levels(),
                blocks: config.decoder.len(),
            });
        }
        let bases = |h: &MeshHierarchy| -> Result<Vec<_>, NetworkError> {
            h.levels
                .iter()
                .map(|l| Ok(Arc::new(EdgeBasis::for_graph(&l.graph, config.spline)?)))
                .collect()
        };
        let heart_bases = bases(&heart)?;
        let torso_bases = bases(&torso)?;
        let graph = build_bipartite(torso.coarsest().vertices(), heart.coarsest().vertices());
        let bipartite = Arc::new(EdgeBasis::for_bipartite(&graph, config.inverse_spline)?);
        let hash = geometry_hash(&heart, &torso);
        Ok(Self {
            heart_pools: heart.maps.iter().cloned().map(Arc::new).collect(),
            torso_pools: torso.maps.iter().cloned().map(Arc::new).collect(),
            heart,
            torso,
            heart_bases,
            torso_bases,
            bipartite,
            hash,
        })
    }

    /// Coarsens both meshes to the given per-level vertex targets.
    pub fn build(
        heart: &TriMesh,
        heart_targets: &[usize],
        torso: &TriMesh,
        torso_targets: &[usize],
        config: &ModelConfig,
    ) -> Result<Self, NetworkError> {
        let h = MeshHierarchy::build(heart, heart_targets)?;
        let t = MeshHierarchy::build(torso, torso_targets)?;
        Self::new(h, t, config)
    }

    /// Same torso, heart hierarchy rotated rigidly about its centroid.
    pub fn with_heart_rotation(&self, axis: Axis, degrees: f64, config: &ModelConfig) -> Result<Self, NetworkError> {
        Self::new(self.heart.rotated(axis, degrees), self.torso.clone(), config)
    }

    pub fn heart(&self) -> &MeshHierarchy {
        &self.heart
    }

    pub fn torso(&self) -> &MeshHierarchy {
        &self.torso
    }

    pub fn num_heart_vertices(&self) -> usize {
        self.heart.finest().num_vertices()
    }

    pub fn num_torso_vertices(&self) -> usize {
        self.torso.finest().num_vertices()
    }

    /// Hex SHA-256 over every level mesh and pooling assignment.
    pub fn hash(&self) -> &str {
        &self.hash
    }
}

fn geometry_hash(heart: &MeshHierarchy, torso: &MeshHierarchy) -> String {
    let mut hasher = Sha256::new();
    for (tag, h) in [("heart", heart), ("torso", torso)] {
        hasher.update(tag.as_bytes());
        for level in &h.levels {
            hasher.update(format_mesh(&level.mesh).as_bytes());
        }
        for map in &h.maps {
            for &a in map.assignment() {
                hasher.update((a as u64).to_le_bytes());
            }
        }
    }
    hex::encode(hasher.finalize())
}

/// Two jittered icosahedra (heart inside torso) coarsened by two vertices
/// per level; small enough for exhaustive finite-difference checks.
pub fn toy_geometry<T: Scalar>(config: &ModelConfig) -> Result<GeometryBundle<T>, NetworkError> {
    let targets = |blocks: usize| -> Result<Vec<usize>, NetworkError> {
        if blocks > 4 {
            return Err(NetworkError::InvalidConfig(format!(
                "the toy geometry supports at most 4 blocks per side, got {blocks}"
            )));
        }
        Ok((1..=blocks).map(|k| 12 - 2 * k).collect())
    };
    let heart = crate::mesh::shapes::icosahedron().jittered(0.05, 1).scaled([0.6, 0.5, 0.7]);
    let torso = crate::mesh::shapes::icosahedron()
        .jittered(0.05, 2)
        .scaled([2.5, 2.0, 3.0])
        .translated([0.2, -0.1, 0.3]);
    GeometryBundle::build(
        &heart,
        &targets(config.decoder.len())?,
        &torso,
        &targets(config.encoder.len())?,
        config,
    )
}

/// A base bundle plus heart-rotated variants keyed by `(axis, degrees)`.
#[derive(Debug, Clone)]
pub struct GeometrySet<T> {
    base: Arc<GeometryBundle<T>>,
    rotated: BTreeMap<(Axis, u64), Arc<GeometryBundle<T>>>,
}

impl<T: Scalar> GeometrySet<T> {
    pub fn new(base: GeometryBundle<T>) -> Self {
        Self {
            base: Arc::new(base),
            rotated: BTreeMap::new(),
        }
    }

    pub fn base(&self) -> &Arc<GeometryBundle<T>> {
        &self.base
    }

    /// Builds the rotated bundle unless it is already present.
    pub fn prepare(&mut self, axis: Axis, degrees: f64, config: &ModelConfig) -> Result<(), NetworkError> {
        if degrees == 0.0 || self.rotated.contains_key(&(axis, degrees.to_bits())) {
            return Ok(());
        }
        let b = self.base.with_heart_rotation(axis, degrees, config)?;
        self.rotated.insert((axis, degrees.to_bits()), Arc::new(b));
        Ok(())
    }

    /// The bundle for a rotation, or `None` if it was never prepared.
    pub fn get(&self, axis: Axis, degrees: f64) -> Option<&Arc<GeometryBundle<T>>> {
        if degrees == 0.0 {
            return Some(&self.base);
        }
        self.rotated.get(&(axis, degrees.to_bits()))
    }
}
