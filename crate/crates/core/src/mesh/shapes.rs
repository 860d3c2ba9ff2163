//! Procedural closed surfaces used as desk-scale heart and torso stand-ins.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Point, TriMesh};

fn build(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> TriMesh {
    TriMesh::new(vertices, triangles).expect("procedural mesh is valid")
}

pub fn single_triangle() -> TriMesh {
    build(
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        vec![[0, 1, 2]],
    )
}

pub fn tetrahedron() -> TriMesh {
    build(
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
    )
}

pub fn octahedron() -> TriMesh {
    build(
        vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ],
        vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ],
    )
}

pub fn icosahedron() -> TriMesh {
    let (v, f) = icosahedron_raw();
    build(v, f)
}

fn icosahedron_raw() -> (Vec<Point>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let v = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, f)
}

/// Unit geodesic sphere: each icosahedron face split into `frequency^2`
/// triangles, giving `10 f^2 + 2` vertices of degree 5 or 6.
pub fn geodesic_sphere(frequency: usize) -> TriMesh {
    assert!(frequency >= 1, "frequency must be positive");
    let (base_v, base_f) = icosahedron_raw();
    let f = frequency;
    let mut vertices: Vec<Point> = Vec::new();
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut get = |p: Point| -> usize {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let q = p.map(|x| x / n);
        let key = q.map(|x| (x * 1e9).round() as i64);
        *index.entry(key).or_insert_with(|| {
            vertices.push(q);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::new();
    for [a, b, c] in base_f {
        let (pa, pb, pc) = (base_v[a], base_v[b], base_v[c]);
        let mut grid = HashMap::new();
        for i in 0..=f {
            for j in 0..=(f - i) {
                let (s, t) = (i as f64 / f as f64, j as f64 / f as f64);
                let p = [0, 1, 2].map(|k| pa[k] + (pb[k] - pa[k]) * s + (pc[k] - pa[k]) * t);
                grid.insert((i, j), get(p));
            }
        }
        for i in 0..f {
            for j in 0..(f - i) {
                triangles.push([grid[&(i, j)], grid[&(i + 1, j)], grid[&(i, j + 1)]]);
                if i + j + 1 < f {
                    triangles.push([grid[&(i + 1, j)], grid[&(i + 1, j + 1)], grid[&(i, j + 1)]]);
                }
            }
        }
    }
    build(vertices, triangles)
}

/// Latitude-longitude sphere with `rings` interior rings of `segments`
/// vertices plus two poles: `rings * segments + 2` vertices.
pub fn uv_sphere(rings: usize, segments: usize) -> TriMesh {
    assert!(rings >= 1 && segments >= 3);
    let mut vertices = vec![[0.0, 0.0, 1.0]];
    for i in 1..=rings {
        let theta = std::f64::consts::PI * i as f64 / (rings + 1) as f64;
        for j in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / segments as f64;
            vertices.push([theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
        }
    }
    vertices.push([0.0, 0.0, -1.0]);
    let south = vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + i * segments + j % segments;
    let mut triangles = Vec::new();
    for j in 0..segments {
        triangles.push([0, ring(0, j), ring(0, j + 1)]);
        triangles.push([south, ring(rings - 1, j + 1), ring(rings - 1, j)]);
    }
    for i in 0..rings - 1 {
        for j in 0..segments {
            triangles.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            triangles.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    build(vertices, triangles)
}

impl TriMesh {
    /// Radial jitter of relative amplitude up to `amplitude`, reproducible by `seed`.
    pub fn jittered(&self, amplitude: f64, seed: u64) -> TriMesh {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = self.centroid();
        let vertices = self
            .vertices()
            .iter()
            .map(|p| {
                let s = 1.0 + amplitude * (2.0 * rng.random::<f64>() - 1.0);
                [0, 1, 2].map(|k| c[k] + (p[k] - c[k]) * s)
            })
            .collect();
        build(vertices, self.triangles().to_vec())
    }
}
