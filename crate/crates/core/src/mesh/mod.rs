//! Triangle meshes, geometry graphs, rigid rotations, topology-preserving
//! coarsening and the pooling maps between hierarchy levels.

mod coarsen;
mod graph;
mod hierarchy;
mod io;
mod pooling;
pub mod shapes;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coarsen::coarsen;
pub use graph::{build_bipartite, build_graph, edge_attribute, BipartiteGraph, GeometryGraph};
pub use hierarchy::{Level, MeshHierarchy};
pub use io::{load_mesh, parse_mesh, write_mesh};
pub(crate) use io::format_mesh;
pub use pooling::PoolingMap;

pub type Point = [f64; 3];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("triangle {triangle}: vertex index {index} out of range for {num_vertices} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        num_vertices: usize,
    },
    #[error("triangle {triangle}: degenerate (repeated vertex)")]
    Degenerate { triangle: usize },
    #[error("edge ({a}, {b}) borders {count} triangles; mesh is not edge-manifold")]
    NonManifold { a: usize, b: usize, count: usize },
    #[error("vertex {vertex}: non-finite coordinate")]
    NonFinite { vertex: usize },
    #[error("mesh has no vertices")]
    Empty,
    #[error("coarsening target {target} invalid for a mesh with {num_vertices} vertices (need 4 <= target < V)")]
    InvalidTarget { target: usize, num_vertices: usize },
    #[error("coarsening stalled at {achieved} vertices before reaching target {target} without changing topology")]
    CoarsenStalled { target: usize, achieved: usize },
    #[error("hierarchy level {level}: Euler characteristic {found}, expected {expected}")]
    TopologyChanged {
        level: usize,
        expected: i64,
        found: i64,
    },
    #[error("invalid pooling map: {0}")]
    InvalidPooling(String),
    #[error("{op}: expected {expected} nodes, found {found}")]
    NodeMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coordinate axis for rigid rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(format!("unknown axis '{other}' (expected x, y or z)")),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Rotation matrix for `degrees` about `axis` (right-handed).
pub fn rotation_matrix(axis: Axis, degrees: f64) -> [[f64; 3]; 3] {
    let (s, c) = degrees.to_radians().sin_cos();
    match axis {
        Axis::X => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        Axis::Y => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        Axis::Z => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
    }
}

pub(crate) fn rotate_about(p: Point, center: Point, r: &[[f64; 3]; 3]) -> Point {
    let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
    let mut out = center;
    for (row, o) in r.iter().zip(out.iter_mut()) {
        *o += row[0] * d[0] + row[1] * d[1] + row[2] * d[2];
    }
    out
}

pub(crate) fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Validated triangle surface mesh.
///
/// Every triangle references three distinct in-range vertices and every edge
/// borders one or two triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if vertices.is_empty() {
            return Err(MeshError::Empty);
        }
        if let Some(v) = vertices.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(MeshError::NonFinite { vertex: v });
        }
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= n) {
                return Err(MeshError::IndexOutOfRange {
                    triangle: t,
                    index,
                    num_vertices: n,
                });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::Degenerate { triangle: t });
            }
        }
        for ((a, b), count) in edge_face_counts(&triangles) {
            if count > 2 {
                return Err(MeshError::NonManifold { a, b, count });
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Unique undirected edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        edge_face_counts(&self.triangles)
            .into_keys()
            .map(|(a, b)| [a, b])
            .collect()
    }

    pub fn num_edges(&self) -> usize {
        self.edges().len()
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_triangles() as i64
    }

    pub fn is_closed(&self) -> bool {
        edge_face_counts(&self.triangles).values().all(|&c| c == 2)
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.vertices {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        c.map(|x| x / n)
    }

    /// Rigid rotation about `axis` through the mesh centroid.
    pub fn rotated(&self, axis: Axis, degrees: f64) -> Self {
        self.rotated_about(axis, degrees, self.centroid())
    }

    pub fn rotated_about(&self, axis: Axis, degrees: f64, center: Point) -> Self {
        let r = rotation_matrix(axis, degrees);
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|&p| rotate_about(p, center, &r))
                .collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Anisotropic scale about the origin.
    pub fn scaled(&self, factors: [f64; 3]) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|p| [p[0] * factors[0], p[1] * factors[1], p[2] * factors[2]])
                .collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn translated(&self, offset: Point) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]])
                .collect(),
            triangles: self.triangles.clone(),
        }
    }
}

/// Rotation of the free-function form used by the data pipeline.
pub fn rotate_mesh(mesh: &TriMesh, axis: Axis, degrees: f64) -> TriMesh {
    mesh.rotated(axis, degrees)
}

pub(crate) fn edge_face_counts(triangles: &[[usize; 3]]) -> BTreeMap<(usize, usize), usize> {
    let mut counts = BTreeMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    counts
}
