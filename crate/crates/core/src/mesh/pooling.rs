use ndarray::{Array2, ArrayD, IxDyn};

use super::MeshError;

/// Fine-to-coarse vertex assignment.
///
/// Conceptually the binary matrix `P` (fine x coarse) with one `1` per row;
/// stored as the column index of each row. Pooling applies the
/// column-normalized transpose (cluster means), unpooling applies `P` (copies).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolingMap {
    assignment: Vec<usize>,
    cluster_sizes: Vec<usize>,
}

impl PoolingMap {
    pub fn new(assignment: Vec<usize>, num_coarse: usize) -> Result<Self, MeshError> {
        let mut cluster_sizes = vec![0usize; num_coarse];
        for (i, &c) in assignment.iter().enumerate() {
            if c >= num_coarse {
                return Err(MeshError::InvalidPooling(format!(
                    "fine vertex {i} assigned to coarse vertex {c} of {num_coarse}"
                )));
            }
            cluster_sizes[c] += 1;
        }
        if let Some(c) = cluster_sizes.iter().position(|&n| n == 0) {
            return Err(MeshError::InvalidPooling(format!("coarse vertex {c} is empty")));
        }
        Ok(Self {
            assignment,
            cluster_sizes,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
            cluster_sizes: vec![1; n],
        }
    }

    pub fn num_fine(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_coarse(&self) -> usize {
        self.cluster_sizes.len()
    }

    /// Coarse vertex of each fine vertex.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    /// Dense binary matrix `P`, fine x coarse.
    pub fn matrix(&self) -> Array2<f64> {
        let mut p = Array2::zeros((self.num_fine(), self.num_coarse()));
        for (i, &c) in self.assignment.iter().enumerate() {
            p[[i, c]] = 1.0;
        }
        p
    }

    /// Column-normalized transpose `P_n^T`, coarse x fine; rows sum to one.
    pub fn normalized_transpose(&self) -> Array2<f64> {
        let mut p = Array2::zeros((self.num_coarse(), self.num_fine()));
        for (i, &c) in self.assignment.iter().enumerate() {
            p[[c, i]] = 1.0 / self.cluster_sizes[c] as f64;
        }
        p
    }

    /// Recovers the map from a dense binary matrix, validating one `1` per row.
    pub fn from_matrix(p: &ArrayD<f64>) -> Result<Self, MeshError> {
        let shape = p.shape();
        if shape.len() != 2 {
            return Err(MeshError::InvalidPooling(format!("expected a matrix, got shape {shape:?}")));
        }
        let (nf, nc) = (shape[0], shape[1]);
        let mut assignment = Vec::with_capacity(nf);
        for i in 0..nf {
            let mut col = None;
            for c in 0..nc {
                match p[IxDyn(&[i, c])] {
                    0.0 => {}
                    v if v == 1.0 && col.is_none() => col = Some(c),
                    _ => {
                        return Err(MeshError::InvalidPooling(format!(
                            "row {i} is not a one-hot binary row"
                        )))
                    }
                }
            }
            assignment.push(col.ok_or_else(|| {
                MeshError::InvalidPooling(format!("row {i} has no assignment"))
            })?);
        }
        Self::new(assignment, nc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_invariants() {
        let m = PoolingMap::new(vec![0, 1, 0, 2, 2, 2], 3).unwrap();
        let p = m.matrix();
        for row in p.rows() {
            assert_eq!(row.sum(), 1.0);
        }
        for col in p.columns() {
            assert!(col.sum() >= 1.0);
        }
        let pn = m.normalized_transpose();
        for row in pn.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-15);
        }
        let back = PoolingMap::from_matrix(&p.into_dyn()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_empty_cluster() {
        assert!(PoolingMap::new(vec![0, 0, 2], 3).is_err());
        assert!(PoolingMap::new(vec![0, 3], 2).is_err());
    }
}
