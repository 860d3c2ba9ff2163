use super::{Point, TriMesh};

/// Pseudo-coordinate of the directed edge from `cj` to `ci`: the unit offset
/// `(ci - cj) / |ci - cj|` mapped into `[0, 1]^3` by `(d + 1) / 2`.
/// Coincident points (self-loops) map to the cube center.
pub fn edge_attribute(ci: Point, cj: Point) -> [f64; 3] {
    let d = [ci[0] - cj[0], ci[1] - cj[1], ci[2] - cj[2]];
    let s = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if s == 0.0 {
        return [0.5; 3];
    }
    d.map(|x| ((x / s + 1.0) / 2.0).clamp(0.0, 1.0))
}

/// Mesh connectivity as a directed graph with one self-loop per vertex.
///
/// Edges are stored as `(target, source)` pairs sorted by target, so that a
/// convolution output at `target` sums over its incoming sources.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryGraph {
    pub num_vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub edge_attrs: Vec<[f64; 3]>,
}

impl GeometryGraph {
    /// Builds the graph from coordinates and undirected edges `a != b`.
    pub fn from_edges(coords: &[Point], undirected: &[[usize; 2]]) -> Self {
        let n = coords.len();
        let mut edges = Vec::with_capacity(2 * undirected.len() + n);
        for &[a, b] in undirected {
            edges.push((a, b));
            edges.push((b, a));
        }
        edges.extend((0..n).map(|i| (i, i)));
        edges.sort_unstable();
        edges.dedup();
        let edge_attrs = edges
            .iter()
            .map(|&(i, j)| {
                if i == j {
                    [0.5; 3]
                } else {
                    edge_attribute(coords[i], coords[j])
                }
            })
            .collect();
        Self {
            num_vertices: n,
            edges,
            edge_attrs,
        }
    }

    pub fn num_directed_edges(&self) -> usize {
        self.edges.len()
    }
}

pub fn build_graph(mesh: &TriMesh) -> GeometryGraph {
    GeometryGraph::from_edges(mesh.vertices(), &mesh.edges())
}

/// Complete bipartite graph from every torso (left) latent vertex to every
/// heart (right) latent vertex. Edges are `(heart target, torso source)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    pub num_left: usize,
    pub num_right: usize,
    pub edges: Vec<(usize, usize)>,
    pub edge_attrs: Vec<[f64; 3]>,
}

pub fn build_bipartite(torso_coords: &[Point], heart_coords: &[Point]) -> BipartiteGraph {
    let mut edges = Vec::with_capacity(torso_coords.len() * heart_coords.len());
    let mut edge_attrs = Vec::with_capacity(edges.capacity());
    for (i, &h) in heart_coords.iter().enumerate() {
        for (j, &t) in torso_coords.iter().enumerate() {
            edges.push((i, j));
            edge_attrs.push(edge_attribute(h, t));
        }
    }
    BipartiteGraph {
        num_left: torso_coords.len(),
        num_right: heart_coords.len(),
        edges,
        edge_attrs,
    }
}
