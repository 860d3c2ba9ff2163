//! Finite-difference gradient checks for every differentiable building block
//! and for the assembled model, in double precision.

use std::sync::Arc;

use ndarray::ArrayD;

use super::{st_gcnn_block, toy_geometry, BlockConfig, BlockVars, BoundParams, Model, ModelConfig, NetworkError, Stage};
use crate::diff::gradcheck::{check_gradients, random_projection, GradCheck};
use crate::diff::{DiffError, Var};
use crate::mesh::{build_bipartite, GeometryGraph, PoolingMap};
use crate::spline::{EdgeBasis, SplineShape};

/// Step used for central differences.
pub const SUITE_STEP: f64 = 1e-5;
/// Largest accepted relative error.
pub const SUITE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub elements: usize,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.max_rel_error < SUITE_TOLERANCE
    }
}

fn entry(name: &'static str, reports: Vec<GradCheck>) -> SuiteEntry {
    SuiteEntry {
        name,
        max_rel_error: reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max),
        elements: reports.iter().map(|r| r.elements).sum(),
    }
}

fn network_to_diff(e: NetworkError) -> DiffError {
    match e {
        NetworkError::Diff(d) => d,
        other => DiffError::ShapeMismatch {
            op: "network",
            detail: other.to_string(),
        },
    }
}

fn small_graph() -> GeometryGraph {
    let coords = [
        [0.0, 0.0, 0.0],
        [0.9, 0.1, 0.0],
        [0.2, 1.1, -0.3],
        [1.0, 1.0, 0.4],
        [-0.4, 0.5, 0.8],
    ];
    GeometryGraph::from_edges(&coords, &[[0, 1], [0, 2], [1, 3], [2, 3], [2, 4], [0, 4]])
}

/// Runs the whole suite. Entries are reported even when they fail; errors
/// mean an operation could not be evaluated at all.
pub fn gradient_suite() -> Result<Vec<SuiteEntry>, NetworkError> {
    let h = SUITE_STEP;
    let shape = SplineShape::default();
    let k = shape.num_bases();
    let mut out = Vec::new();

    let basis = Arc::new(EdgeBasis::for_graph(&small_graph(), shape)?);
    let r = random_projection::<f64>(&[5, 3, 4], 3);
    out.push(entry(
        "spline_conv",
        check_gradients(
            &[random_projection(&[5, 2, 4], 1), random_projection(&[k, 2, 3], 2)],
            h,
            |t, v| {
                let y = t.spline_conv(&basis, v[0], v[1])?;
                t.project(y, &r)
            },
        )?,
    ));

    let torso = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.5], [-2.0, -1.0, 0.0]];
    let heart = [[0.1, 0.0, 0.0], [0.0, 0.3, 0.1], [-0.2, 0.0, 0.2]];
    let bip = Arc::new(EdgeBasis::for_bipartite(&build_bipartite(&torso, &heart), shape)?);
    let r = random_projection::<f64>(&[3, 2, 3], 6);
    out.push(entry(
        "bipartite_spline_conv",
        check_gradients(
            &[random_projection(&[4, 2, 3], 4), random_projection(&[k, 2, 2], 5)],
            h,
            |t, v| {
                let y = t.bipartite_spline_conv(&bip, v[0], v[1])?;
                t.project(y, &r)
            },
        )?,
    ));

    let r = random_projection::<f64>(&[2, 4, 5], 9);
    out.push(entry(
        "temporal_conv",
        check_gradients(
            &[random_projection(&[2, 3, 9], 7), random_projection(&[4, 3, 3], 8)],
            h,
            |t, v| {
                let y = t.temporal_conv(v[0], v[1], 2, 1)?;
                t.project(y, &r)
            },
        )?,
    ));

    let r = random_projection::<f64>(&[2, 3, 10], 12);
    out.push(entry(
        "temporal_conv_transpose",
        check_gradients(
            &[random_projection(&[2, 4, 5], 10), random_projection(&[4, 3, 3], 11)],
            h,
            |t, v| {
                let y = t.temporal_conv_transpose(v[0], v[1], 2, 1, 10)?;
                t.project(y, &r)
            },
        )?,
    ));

    let map = Arc::new(PoolingMap::new(vec![0, 1, 1, 2, 0, 2, 2], 3)?);
    let r = random_projection::<f64>(&[3, 2, 3], 14);
    out.push(entry(
        "pool",
        check_gradients(&[random_projection(&[7, 2, 3], 13)], h, |t, v| {
            let y = t.pool(v[0], &map)?;
            t.project(y, &r)
        })?,
    ));
    let r = random_projection::<f64>(&[7, 2, 3], 16);
    out.push(entry(
        "unpool",
        check_gradients(&[random_projection(&[3, 2, 3], 15)], h, |t, v| {
            let y = t.unpool(v[0], &map)?;
            t.project(y, &r)
        })?,
    ));

    let r = random_projection::<f64>(&[4, 3, 5], 18);
    out.push(entry(
        "elu",
        check_gradients(&[random_projection::<f64>(&[4, 3, 5], 17).mapv(|v| 3.0 * v)], h, |t, v| {
            let y = t.elu(v[0]);
            t.project(y, &r)
        })?,
    ));

    let target = random_projection::<f64>(&[4, 3, 5], 20);
    out.push(entry(
        "mse_loss",
        check_gradients(&[random_projection(&[4, 3, 5], 19)], h, |t, v| t.mse_loss(v[0], &target))?,
    ));

    let block = BlockConfig::new(2, 3, 2);
    let pool = Arc::new(PoolingMap::new(vec![0, 0, 1, 1, 0], 2)?);
    let r = random_projection::<f64>(&[2, 3, 4], 24);
    out.push(entry(
        "residual_block",
        check_gradients(
            &[
                random_projection(&[5, 2, 8], 21),
                random_projection(&[k, 2, 3], 22),
                random_projection(&[3, 2, 1], 23),
                random_projection(&[3, 3, block.width], 25),
            ],
            h,
            |t, v| {
                let vars = BlockVars {
                    spline: v[1],
                    residual: v[2],
                    temporal: v[3],
                };
                let y = st_gcnn_block(t, v[0], &block, Stage::Encode { pool: Some(&pool) }, &basis, vars)
                    .map_err(network_to_diff)?;
                t.project(y, &r)
            },
        )?,
    ));

    let config = ModelConfig::narrow(2, 8);
    let geo = toy_geometry::<f64>(&config)?;
    let model = Model::<f64>::new(config, 31)?;
    let torso_n = geo.num_torso_vertices();
    let heart_n = geo.num_heart_vertices();
    let y = random_projection::<f64>(&[torso_n, 1, 8], 32);
    let x = random_projection::<f64>(&[heart_n, 1, 8], 33).mapv(f64::abs);
    let inputs: Vec<ArrayD<f64>> = model.params().tensors().iter().map(|(_, t)| t.clone()).collect();
    out.push(entry(
        "full_model",
        check_gradients(&inputs, h, |t, v: &[Var]| {
            let yv = t.constant(y.clone());
            let pred = model
                .forward(t, &BoundParams(v.to_vec()), &geo, yv)
                .map_err(network_to_diff)?;
            t.mse_loss(pred, &x)
        })?,
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_passes() {
        let entries = gradient_suite().unwrap();
        assert_eq!(entries.len(), 10);
        for e in &entries {
            assert!(e.passed(), "{e:?}");
            assert!(e.elements > 0);
        }
    }
}
