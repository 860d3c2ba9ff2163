use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    activation_metrics, cc_metric, default_duration_threshold, mse_metric, scar_identify, EvalError, MetricReport,
    SampleMetrics,
};
use crate::data::{Generator, Sample};
use crate::mesh::Axis;
use crate::network::{GeometryBundle, GeometrySet, Model};
use crate::Scalar;

/// Settings of the generalization experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub sweep_axis: Axis,
    pub sweep_degrees: Vec<f64>,
    /// scar duration threshold in frames; unset means half the median
    /// healthy duration of each ground-truth sample
    pub duration_threshold: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            sweep_axis: Axis::Z,
            sweep_degrees: (-6..=6).map(f64::from).collect(),
            duration_threshold: None,
        }
    }
}

fn score<T: Scalar>(
    model: &Model<T>,
    geometry: &GeometryBundle<T>,
    sample: &Sample<T>,
    scar: Option<&BTreeSet<usize>>,
    threshold: Option<f64>,
) -> Result<SampleMetrics, EvalError> {
    let x_hat = model.predict(geometry, &sample.y)?;
    let dice = scar.map(|truth| {
        let t = threshold.unwrap_or_else(|| default_duration_threshold(&activation_metrics(&sample.x)));
        scar_identify(&x_hat, t, truth).dice
    });
    Ok(SampleMetrics {
        id: sample.meta.id.clone(),
        origin: sample.meta.origin,
        scar: sample.meta.scar,
        axis: sample.meta.axis,
        degrees: sample.meta.degrees,
        mse: mse_metric(&x_hat, &sample.x)?,
        cc: cc_metric(&x_hat, &sample.x)?,
        dice,
    })
}

/// Reconstructs every sample on the geometry of its rotation and reports
/// metrics grouped by rotation degrees. `scars[k]` is the true vertex set of
/// scar index `k`, enabling the Dice column.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    geometries: &GeometrySet<T>,
    samples: &[Sample<T>],
    scars: Option<&[BTreeSet<usize>]>,
    threshold: Option<f64>,
) -> Result<MetricReport, EvalError> {
    let rows = samples
        .par_iter()
        .map(|s| {
            let geo = geometries
                .get(s.meta.axis, s.meta.degrees)
                .ok_or(crate::train::TrainError::MissingGeometry {
                    axis: s.meta.axis,
                    degrees: s.meta.degrees,
                })?;
            score(model, geo, s, scars.map(|sc| &sc[s.meta.scar]), threshold)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricReport::new("degrees", rows, |s| s.degrees.to_string()))
}

fn convert<T: Scalar>(s: Sample<f64>) -> Sample<T> {
    Sample {
        meta: s.meta,
        x: s.x.mapv(T::of),
        y: s.y.mapv(T::of),
    }
}

/// Fresh samples for every origin and scar at each rotation, reconstructed
/// on the correspondingly rotated heart geometry; one group per degree.
pub fn rotation_sweep<T: Scalar>(
    model: &Model<T>,
    base: &GeometryBundle<T>,
    generator: &Generator,
    axis: Axis,
    degrees: &[f64],
    threshold: Option<f64>,
) -> Result<MetricReport, EvalError> {
    let scars: Vec<BTreeSet<usize>> = generator.scars.iter().map(|s| s.vertices().clone()).collect();
    let mut rows = Vec::new();
    for &deg in degrees {
        let geo = base.with_heart_rotation(axis, deg, model.config())?;
        let specs = generator.grid(axis, &[deg]);
        let part = specs
            .par_iter()
            .map(|spec| {
                let sample = convert::<T>(generator.generate(spec)?);
                score(model, &geo, &sample, Some(&scars[spec.scar]), threshold)
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        rows.extend(part);
    }
    Ok(MetricReport::new("degrees", rows, |s| s.degrees.to_string()))
}

/// Runs the trained parameters unchanged on a different heart/torso pair;
/// `generator` must be built on that pair's finest meshes.
pub fn cross_geometry_eval<T: Scalar>(
    model: &Model<T>,
    geometry: &GeometryBundle<T>,
    generator: &Generator,
    threshold: Option<f64>,
) -> Result<MetricReport, EvalError> {
    if generator.heart.num_vertices() != geometry.num_heart_vertices()
        || generator.torso.num_vertices() != geometry.num_torso_vertices()
    {
        return Err(EvalError::GeometryMismatch {
            expected: format!("{}/{} vertices", geometry.num_heart_vertices(), geometry.num_torso_vertices()),
            found: format!("{}/{} vertices", generator.heart.num_vertices(), generator.torso.num_vertices()),
        });
    }
    rotation_sweep(model, geometry, generator, Axis::Z, &[0.0], threshold)
        .map(|r| MetricReport::new("geometry", r.samples, |_| geometry.hash()[..12].to_string()))
}
