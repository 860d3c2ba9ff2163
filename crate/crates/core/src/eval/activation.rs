use std::collections::BTreeSet;

use ndarray::{ArrayD, Axis};

use crate::Scalar;

/// Level of the normalized potential that counts as activated.
pub const ACTIVATION_LEVEL: f64 = 0.5;

/// Per-vertex activation time (first frame at or above the level) and
/// duration (number of such frames).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationMetrics {
    /// `None` for vertices that never activate
    pub time: Vec<Option<usize>>,
    pub duration: Vec<usize>,
}

impl ActivationMetrics {
    pub fn inactive(&self) -> impl Iterator<Item = usize> + '_ {
        self.time.iter().enumerate().filter(|(_, t)| t.is_none()).map(|(i, _)| i)
    }
}

/// `x` is `(vertices, 1, T)` or `(vertices, T)`.
pub fn activation_metrics<T: Scalar>(x: &ArrayD<T>) -> ActivationMetrics {
    let level = T::of(ACTIVATION_LEVEL);
    let mut time = Vec::with_capacity(x.shape()[0]);
    let mut duration = Vec::with_capacity(x.shape()[0]);
    for row in x.axis_iter(Axis(0)) {
        time.push(row.iter().position(|&u| u >= level));
        duration.push(row.iter().filter(|&&u| u >= level).count());
    }
    ActivationMetrics { time, duration }
}

/// Half the median duration over activated vertices (1 frame if none activate).
pub fn default_duration_threshold(metrics: &ActivationMetrics) -> f64 {
    let mut d: Vec<usize> = metrics.duration.iter().copied().filter(|&d| d > 0).collect();
    if d.is_empty() {
        return 1.0;
    }
    d.sort_unstable();
    let median = if d.len() % 2 == 1 {
        d[d.len() / 2] as f64
    } else {
        (d[d.len() / 2 - 1] + d[d.len() / 2]) as f64 / 2.0
    };
    0.5 * median
}

/// `2 |A n B| / (|A| + |B|)`, defined as 1 for two empty sets.
pub fn dice(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    2.0 * a.intersection(b).count() as f64 / (a.len() + b.len()) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScarResult {
    pub predicted: BTreeSet<usize>,
    pub truth: BTreeSet<usize>,
    pub dice: f64,
}

/// Vertices whose activation lasts fewer than `duration_threshold` frames
/// (never-activated vertices included) form the predicted scar.
pub fn scar_identify<T: Scalar>(x_hat: &ArrayD<T>, duration_threshold: f64, truth: &BTreeSet<usize>) -> ScarResult {
    let m = activation_metrics(x_hat);
    let predicted: BTreeSet<usize> = (0..m.duration.len())
        .filter(|&i| (m.duration[i] as f64) < duration_threshold)
        .collect();
    ScarResult {
        dice: dice(&predicted, truth),
        predicted,
        truth: truth.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;
    use crate::physics::{simulate_ap, simulate_ap_graph, single_cell_trace, APParams, Laplacian, ScarMap};

    #[test]
    fn step_signal_and_silent_vertex() {
        let mut x = ArrayD::<f64>::zeros(vec![2, 1, 60]);
        for t in 10..=40 {
            x[[0, 0, t]] = 1.0;
        }
        let m = activation_metrics(&x);
        assert_eq!(m.time, vec![Some(10), None]);
        assert_eq!(m.duration, vec![31, 0]);
        assert_eq!(m.inactive().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn dice_examples() {
        let a: BTreeSet<usize> = (0..10).collect();
        let b: BTreeSet<usize> = (5..15).collect();
        assert_eq!(dice(&a, &b), 0.5);
        assert_eq!(dice(&a, &a), 1.0);
        assert_eq!(dice(&BTreeSet::new(), &a), 0.0);
        assert_eq!(dice(&BTreeSet::new(), &BTreeSet::new()), 1.0);
    }

    #[test]
    fn every_healthy_vertex_activates_with_similar_duration() {
        let params = APParams::default();
        let cell = single_cell_trace(&params, 60).unwrap();
        let reference = cell.iter().filter(|&&u| u >= ACTIVATION_LEVEL).count();
        let mesh = shapes::geodesic_sphere(3);
        let x = simulate_ap(&mesh, Some(0), &ScarMap::empty(), &params, 60).unwrap();
        let m = activation_metrics(&x);
        assert_eq!(m.inactive().count(), 0);
        let lo = *m.duration.iter().min().unwrap();
        let hi = *m.duration.iter().max().unwrap();
        // diffusive load shortens tissue plateaus relative to an isolated cell
        assert!(hi <= reference && hi - lo <= 5, "{lo}..{hi} vs {reference}");
        assert!(default_duration_threshold(&m) < lo as f64);
    }

    #[test]
    fn weakly_loaded_vertex_matches_single_cell_plateau() {
        let params = APParams::default();
        let cell = single_cell_trace(&params, 60).unwrap();
        let reference = cell.iter().filter(|&&u| u >= ACTIVATION_LEVEL).count() as i64;
        let pair = Laplacian::from_edges(2, &[[0, 1]]).unwrap();
        let x = simulate_ap_graph(&pair, Some(0), &ScarMap::empty(), &params, 60).unwrap();
        let d = activation_metrics(&x).duration[0] as i64;
        assert!((d - reference).abs() <= 2, "{d} vs {reference}");
    }

    #[test]
    fn perfect_scar_reconstruction_and_monotone_thresholds() {
        let mesh = shapes::geodesic_sphere(3);
        let scar = ScarMap::geodesic_ball(&mesh, 40, 0.5).unwrap();
        let truth: BTreeSet<usize> = scar.vertices().clone();
        let x = simulate_ap(&mesh, Some(0), &scar, &APParams::default(), 60).unwrap();
        let threshold = default_duration_threshold(&activation_metrics(&x));
        assert_eq!(scar_identify(&x, threshold, &truth).dice, 1.0);
        let empty = scar_identify(&x, 0.0, &truth);
        assert!(empty.predicted.is_empty());
        assert_eq!(empty.dice, 0.0);
        let mut prev = BTreeSet::new();
        for t in 0..=61 {
            let r = scar_identify(&x, t as f64, &truth);
            assert!(prev.is_subset(&r.predicted));
            prev = r.predicted;
        }
    }
}
