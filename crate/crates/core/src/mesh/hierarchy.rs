use std::path::Path;

use super::{build_graph, coarsen, load_mesh, write_mesh, Axis, GeometryGraph, MeshError, PoolingMap, TriMesh};
use crate::diff::io::{load_tensor, save_tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub mesh: TriMesh,
    pub graph: GeometryGraph,
}

impl Level {
    fn new(mesh: TriMesh) -> Self {
        let graph = build_graph(&mesh);
        Self { mesh, graph }
    }
}

/// Fine-to-coarse sequence of meshes; `maps[k]` pools level `k` into `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshHierarchy {
    pub levels: Vec<Level>,
    pub maps: Vec<PoolingMap>,
}

impl MeshHierarchy {
    /// Coarsens `mesh` successively to each entry of `targets`.
    pub fn build(mesh: &TriMesh, targets: &[usize]) -> Result<Self, MeshError> {
        let mut levels = vec![Level::new(mesh.clone())];
        let mut maps = Vec::with_capacity(targets.len());
        for &target in targets {
            let (coarse, map) = coarsen(&levels.last().unwrap().mesh, target)?;
            levels.push(Level::new(coarse));
            maps.push(map);
        }
        let h = Self { levels, maps };
        h.check_topology()?;
        Ok(h)
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn vertex_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.mesh.num_vertices()).collect()
    }

    pub fn finest(&self) -> &TriMesh {
        &self.levels[0].mesh
    }

    pub fn coarsest(&self) -> &TriMesh {
        &self.levels.last().unwrap().mesh
    }

    pub fn check_topology(&self) -> Result<(), MeshError> {
        let expected = self.levels[0].mesh.euler_characteristic();
        for (k, level) in self.levels.iter().enumerate() {
            let found = level.mesh.euler_characteristic();
            if found != expected {
                return Err(MeshError::TopologyChanged {
                    level: k,
                    expected,
                    found,
                });
            }
        }
        for (k, map) in self.maps.iter().enumerate() {
            let (nf, nc) = (self.levels[k].mesh.num_vertices(), self.levels[k + 1].mesh.num_vertices());
            if map.num_fine() != nf || map.num_coarse() != nc || nc >= nf {
                return Err(MeshError::InvalidPooling(format!(
                    "map {k} is {}x{}, levels are {nf} and {nc}",
                    map.num_fine(),
                    map.num_coarse()
                )));
            }
        }
        Ok(())
    }

    /// Rigidly rotates every level about the finest mesh's centroid; the
    /// pooling structure is unchanged.
    pub fn rotated(&self, axis: Axis, degrees: f64) -> Self {
        let center = self.finest().centroid();
        Self {
            levels: self
                .levels
                .iter()
                .map(|l| Level::new(l.mesh.rotated_about(axis, degrees, center)))
                .collect(),
            maps: self.maps.clone(),
        }
    }

    /// Writes `level<k>.mesh` and `pool<k>.bin` (dense binary `P`) into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), MeshError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (k, level) in self.levels.iter().enumerate() {
            write_mesh(dir.join(format!("level{k}.mesh")), &level.mesh)?;
        }
        for (k, map) in self.maps.iter().enumerate() {
            save_tensor(dir.join(format!("pool{k}.bin")), &map.matrix().into_dyn())?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, MeshError> {
        let dir = dir.as_ref();
        let mut levels = Vec::new();
        while dir.join(format!("level{}.mesh", levels.len())).exists() {
            levels.push(Level::new(load_mesh(dir.join(format!("level{}.mesh", levels.len())))?));
        }
        if levels.is_empty() {
            return Err(MeshError::Empty);
        }
        let mut maps = Vec::new();
        for k in 0..levels.len() - 1 {
            let p = load_tensor::<f64>(dir.join(format!("pool{k}.bin")))
                .map_err(|e| MeshError::InvalidPooling(e.to_string()))?;
            maps.push(PoolingMap::from_matrix(&p)?);
        }
        let h = Self { levels, maps };
        h.check_topology()?;
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn multi_level_preserves_euler_characteristic() {
        let mesh = shapes::geodesic_sphere(4);
        assert_eq!(mesh.num_vertices(), 162);
        let h = MeshHierarchy::build(&mesh, &[100, 50, 25, 12]).unwrap();
        assert_eq!(h.vertex_counts(), vec![162, 100, 50, 25, 12]);
        for l in &h.levels {
            assert_eq!(l.mesh.euler_characteristic(), 2);
        }
    }

    #[test]
    fn empty_targets_single_level() {
        let h = MeshHierarchy::build(&shapes::icosahedron(), &[]).unwrap();
        assert_eq!(h.num_levels(), 1);
        assert!(h.maps.is_empty());
    }

    #[test]
    fn save_load_round_trip() {
        let h = MeshHierarchy::build(&shapes::geodesic_sphere(2), &[20, 8]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        h.save(dir.path()).unwrap();
        assert_eq!(MeshHierarchy::load(dir.path()).unwrap(), h);
    }

    #[test]
    fn rotation_keeps_pooling() {
        let h = MeshHierarchy::build(&shapes::geodesic_sphere(2), &[20]).unwrap();
        let r = h.rotated(Axis::Z, 5.0);
        assert_eq!(r.maps, h.maps);
        assert_eq!(r.vertex_counts(), h.vertex_counts());
    }
}
