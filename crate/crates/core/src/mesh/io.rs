//! Plain-text mesh format: a `V F` header line, `V` lines of `x y z`, then
//! `F` lines of zero-based `i j k`. Blank lines are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::{MeshError, Point, TriMesh};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub fn parse_mesh(text: &str) -> Result<TriMesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line, header) = lines.next().ok_or(MeshError::Parse {
        line: 1,
        msg: "missing `V F` header".into(),
    })?;
    let counts: Vec<usize> = parse_fields(line, header, 2)?;
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (line, l) = lines.next().ok_or_else(|| MeshError::Parse {
            line: 0,
            msg: format!("unexpected end of file: read {k} of {nv} vertices"),
        })?;
        let c: Vec<f64> = parse_fields(line, l, 3)?;
        vertices.push([c[0], c[1], c[2]] as Point);
    }
    let mut triangles = Vec::with_capacity(nf);
    for k in 0..nf {
        let (line, l) = lines.next().ok_or_else(|| MeshError::Parse {
            line: 0,
            msg: format!("unexpected end of file: read {k} of {nf} triangles"),
        })?;
        let t: Vec<usize> = parse_fields(line, l, 3)?;
        triangles.push([t[0], t[1], t[2]]);
    }
    if let Some((line, _)) = lines.next() {
        return Err(MeshError::Parse {
            line,
            msg: "trailing content after the last triangle".into(),
        });
    }
    TriMesh::new(vertices, triangles)
}

fn parse_fields<F: std::str::FromStr>(line: usize, text: &str, n: usize) -> Result<Vec<F>, MeshError> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != n {
        return Err(MeshError::Parse {
            line,
            msg: format!("expected {n} fields, found {}", fields.len()),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse().map_err(|_| MeshError::Parse {
                line,
                msg: format!("cannot parse '{f}'"),
            })
        })
        .collect()
}

/// Writes `mesh` using shortest round-trip float formatting, so a reload is exact.
pub fn write_mesh(path: impl AsRef<Path>, mesh: &TriMesh) -> Result<(), MeshError> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}

pub(crate) fn format_mesh(mesh: &TriMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", mesh.num_vertices(), mesh.num_triangles());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    const TETRA: &str = "4 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 2 1\n0 1 3\n0 3 2\n1 2 3\n";

    #[test]
    fn parses_tetrahedron() {
        let m = parse_mesh(TETRA).unwrap();
        assert_eq!((m.num_vertices(), m.num_triangles()), (4, 4));
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn out_of_range_index_reported() {
        let bad = TETRA.replace("1 2 3", "1 2 9");
        match parse_mesh(&bad) {
            Err(MeshError::IndexOutOfRange { triangle, index, .. }) => {
                assert_eq!((triangle, index), (3, 9));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = TETRA.replace("0 1 0", "0 one 0");
        match parse_mesh(&bad) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_mesh("4 4\n0 0 0\n"), Err(MeshError::Parse { .. })));
    }

    #[test]
    fn write_then_load_is_exact() {
        let m = shapes::geodesic_sphere(2).scaled([1.1, 0.9, 1.3]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.mesh");
        write_mesh(&p, &m).unwrap();
        assert_eq!(load_mesh(&p).unwrap(), m);
    }
}
