use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use super::PhysicsError;
use crate::mesh::TriMesh;

/// Shortest-path distances along mesh edges (Euclidean edge lengths).
pub fn geodesic_distances(mesh: &TriMesh, source: usize) -> Vec<f64> {
    let n = mesh.num_vertices();
    let mut adj = vec![Vec::new(); n];
    let vs = mesh.vertices();
    for [a, b] in mesh.edges() {
        let d = crate::mesh::distance(vs[a], vs[b]);
        adj[a].push((b, d));
        adj[b].push((a, d));
    }

    #[derive(PartialEq)]
    struct Entry(f64, usize);
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
        }
    }

    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([Entry(0.0, source)]);
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, len) in &adj[v] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry(nd, w));
            }
        }
    }
    dist
}

/// Set of non-excitable heart vertices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScarMap {
    vertices: BTreeSet<usize>,
}

impl ScarMap {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates range and connectivity along mesh edges.
    pub fn new(mesh: &TriMesh, vertices: BTreeSet<usize>) -> Result<Self, PhysicsError> {
        let n = mesh.num_vertices();
        if let Some(&v) = vertices.iter().find(|&&v| v >= n) {
            return Err(PhysicsError::VertexOutOfRange { vertex: v, num_vertices: n });
        }
        if let Some(&start) = vertices.iter().next() {
            let mut adj = vec![Vec::new(); n];
            for [a, b] in mesh.edges() {
                if vertices.contains(&a) && vertices.contains(&b) {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
            let mut seen = BTreeSet::from([start]);
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
            if seen.len() != vertices.len() {
                return Err(PhysicsError::DisconnectedScar);
            }
        }
        Ok(Self { vertices })
    }

    /// Vertices within geodesic distance `radius` of `center`.
    pub fn geodesic_ball(mesh: &TriMesh, center: usize, radius: f64) -> Result<Self, PhysicsError> {
        if center >= mesh.num_vertices() {
            return Err(PhysicsError::VertexOutOfRange {
                vertex: center,
                num_vertices: mesh.num_vertices(),
            });
        }
        let dist = geodesic_distances(mesh, center);
        let set = (0..dist.len()).filter(|&v| dist[v] <= radius).collect();
        Self::new(mesh, set)
    }

    pub fn vertices(&self) -> &BTreeSet<usize> {
        &self.vertices
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertices.contains(&v)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}
