//! Shortest-edge collapse with a link-condition guard.
//!
//! Each step collapses the shortest admissible edge `(a, b)` into its
//! midpoint. An edge is admissible when both endpoints are interior and the
//! link condition holds: the common neighbours of `a` and `b` are exactly the
//! two vertices opposite the edge, and those two are not joined by triangles
//! on both sides. Collapses satisfying it keep the surface a manifold with
//! the same Euler characteristic.

use std::collections::{BTreeSet, HashSet};

use super::{distance, edge_face_counts, MeshError, Point, PoolingMap, TriMesh};

/// Coarsens `mesh` to exactly `target_vertex_count` vertices.
pub fn coarsen(mesh: &TriMesh, target_vertex_count: usize) -> Result<(TriMesh, PoolingMap), MeshError> {
    let n = mesh.num_vertices();
    if target_vertex_count < 4 || target_vertex_count >= n {
        return Err(MeshError::InvalidTarget {
            target: target_vertex_count,
            num_vertices: n,
        });
    }
    let mut state = CollapseState::new(mesh);
    while state.alive_count > target_vertex_count {
        if !state.collapse_shortest() {
            return Err(MeshError::CoarsenStalled {
                target: target_vertex_count,
                achieved: state.alive_count,
            });
        }
    }
    state.finish()
}

struct CollapseState {
    positions: Vec<Point>,
    triangles: Vec<Option<[usize; 3]>>,
    incident: Vec<BTreeSet<usize>>,
    alive: Vec<bool>,
    alive_count: usize,
    // union-find style parent pointers: merged vertex -> survivor
    merged_into: Vec<usize>,
    boundary: Vec<bool>,
}

impl CollapseState {
    fn new(mesh: &TriMesh) -> Self {
        let n = mesh.num_vertices();
        let mut incident = vec![BTreeSet::new(); n];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for &v in tri {
                incident[v].insert(t);
            }
        }
        let mut boundary = vec![false; n];
        for ((a, b), count) in edge_face_counts(mesh.triangles()) {
            if count == 1 {
                boundary[a] = true;
                boundary[b] = true;
            }
        }
        // Isolated vertices carry no topology to protect but cannot be collapsed either.
        for (v, inc) in incident.iter().enumerate() {
            if inc.is_empty() {
                boundary[v] = true;
            }
        }
        Self {
            positions: mesh.vertices().to_vec(),
            triangles: mesh.triangles().iter().map(|&t| Some(t)).collect(),
            incident,
            alive: vec![true; n],
            alive_count: n,
            merged_into: (0..n).collect(),
            boundary,
        }
    }

    fn neighbors(&self, v: usize) -> BTreeSet<usize> {
        self.incident[v]
            .iter()
            .filter_map(|&t| self.triangles[t])
            .flat_map(|tri| tri.into_iter())
            .filter(|&w| w != v)
            .collect()
    }

    fn has_triangle(&self, a: usize, b: usize, c: usize) -> bool {
        self.incident[a].iter().any(|&t| {
            self.triangles[t].is_some_and(|tri| tri.contains(&b) && tri.contains(&c))
        })
    }

    fn admissible(&self, a: usize, b: usize) -> bool {
        if self.boundary[a] || self.boundary[b] {
            return false;
        }
        let opposite: BTreeSet<usize> = self.incident[a]
            .iter()
            .filter_map(|&t| self.triangles[t])
            .filter(|tri| tri.contains(&b))
            .flat_map(|tri| tri.into_iter())
            .filter(|&w| w != a && w != b)
            .collect();
        if opposite.len() != 2 {
            return false;
        }
        let common: BTreeSet<usize> = self
            .neighbors(a)
            .intersection(&self.neighbors(b))
            .copied()
            .collect();
        if common != opposite {
            return false;
        }
        let mut it = opposite.iter();
        let (c, d) = (*it.next().unwrap(), *it.next().unwrap());
        !(self.has_triangle(a, c, d) && self.has_triangle(b, c, d))
    }

    fn collapse_shortest(&mut self) -> bool {
        let mut seen = HashSet::new();
        let mut candidates = Vec::new();
        for tri in self.triangles.iter().flatten() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let e = (a.min(b), a.max(b));
                if seen.insert(e) {
                    candidates.push((distance(self.positions[e.0], self.positions[e.1]), e));
                }
            }
        }
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for (_, (a, b)) in candidates {
            if self.admissible(a, b) {
                self.collapse(a, b);
                return true;
            }
        }
        false
    }

    /// Merges `b` into `a`, placing `a` at the edge midpoint.
    fn collapse(&mut self, a: usize, b: usize) {
        let (pa, pb) = (self.positions[a], self.positions[b]);
        self.positions[a] = [0, 1, 2].map(|k| 0.5 * (pa[k] + pb[k]));
        let b_tris: Vec<usize> = self.incident[b].iter().copied().collect();
        for t in b_tris {
            let Some(tri) = self.triangles[t] else { continue };
            if tri.contains(&a) {
                self.triangles[t] = None;
                for v in tri {
                    self.incident[v].remove(&t);
                }
            } else {
                self.triangles[t] = Some(tri.map(|v| if v == b { a } else { v }));
                self.incident[a].insert(t);
            }
        }
        self.incident[b].clear();
        self.alive[b] = false;
        self.alive_count -= 1;
        self.merged_into[b] = a;
    }

    fn root(&self, mut v: usize) -> usize {
        while self.merged_into[v] != v {
            v = self.merged_into[v];
        }
        v
    }

    fn finish(self) -> Result<(TriMesh, PoolingMap), MeshError> {
        let mut new_index = vec![usize::MAX; self.alive.len()];
        let mut vertices = Vec::with_capacity(self.alive_count);
        for (v, _) in self.alive.iter().enumerate().filter(|(_, &a)| a) {
            new_index[v] = vertices.len();
            vertices.push(self.positions[v]);
        }
        let triangles = self
            .triangles
            .iter()
            .flatten()
            .map(|t| t.map(|v| new_index[v]))
            .collect();
        let assignment = (0..self.alive.len())
            .map(|v| new_index[self.root(v)])
            .collect();
        let coarse = TriMesh::new(vertices, triangles)?;
        let map = PoolingMap::new(assignment, coarse.num_vertices())?;
        Ok((coarse, map))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn rejects_noop_and_tiny_targets() {
        let ico = shapes::icosahedron();
        assert!(matches!(coarsen(&ico, 12), Err(MeshError::InvalidTarget { .. })));
        assert!(matches!(coarsen(&ico, 3), Err(MeshError::InvalidTarget { .. })));
    }

    #[test]
    fn icosahedron_to_six() {
        let (c, map) = coarsen(&shapes::icosahedron(), 6).unwrap();
        assert_eq!(c.num_vertices(), 6);
        assert_eq!(c.euler_characteristic(), 2);
        assert!(c.is_closed());
        let p = map.matrix();
        for row in p.rows() {
            assert_eq!(row.sum(), 1.0);
        }
        assert_eq!(map.cluster_sizes().iter().sum::<usize>(), 12);
    }

    #[test]
    fn octahedron_reaches_tetrahedron_but_not_below() {
        let (c, _) = coarsen(&shapes::octahedron(), 4).unwrap();
        assert_eq!(c.num_vertices(), 4);
        assert_eq!(c.num_triangles(), 4);
        assert_eq!(c.euler_characteristic(), 2);
    }

    #[test]
    fn hundred_vertex_sphere_to_25() {
        let mesh = shapes::uv_sphere(7, 14).jittered(0.05, 11);
        assert_eq!(mesh.num_vertices(), 100);
        let (c, map) = coarsen(&mesh, 25).unwrap();
        assert_eq!(c.num_vertices(), 25);
        // independent V - E + F recount from the raw triangle list
        let mut edges = HashSet::new();
        for t in c.triangles() {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let chi = 25 - edges.len() as i64 + c.num_triangles() as i64;
        assert_eq!(chi, 2);
        let mean = map.cluster_sizes().iter().sum::<usize>() as f64 / 25.0;
        assert_eq!(mean, 4.0);
    }

    #[test]
    fn open_mesh_keeps_boundary() {
        // A disk (hexagon fan with an interior ring) has chi = 1.
        let mesh = shapes::uv_sphere(5, 10);
        let tris: Vec<[usize; 3]> = mesh
            .triangles()
            .iter()
            .copied()
            .filter(|t| !t.contains(&(mesh.num_vertices() - 1)))
            .collect();
        let open = TriMesh::new(mesh.vertices().to_vec(), tris).unwrap();
        let before = open.euler_characteristic();
        let (c, _) = coarsen(&open, 30).unwrap();
        assert_eq!(c.euler_characteristic(), before);
    }
}
