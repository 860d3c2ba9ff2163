use std::fmt::Write as _;

use serde::Serialize;

use crate::mesh::Axis;

/// Metrics of one reconstructed sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleMetrics {
    pub id: String,
    pub origin: usize,
    pub scar: usize,
    pub axis: Axis,
    pub degrees: f64,
    pub mse: f64,
    pub cc: f64,
    /// Dice of duration-based scar identification, when the true scar is known
    pub dice: Option<f64>,
}

/// Mean and population standard deviation over one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub key: String,
    pub count: usize,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub cc_mean: f64,
    pub cc_std: f64,
    pub dice_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    /// what the summary groups are keyed by, e.g. `degrees`
    pub group_by: String,
    pub cc_definition: &'static str,
    pub samples: Vec<SampleMetrics>,
    pub groups: Vec<GroupSummary>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl MetricReport {
    pub const CC_DEFINITION: &'static str = "pearson correlation over the flattened vertex x time block of each sample";

    /// Groups `samples` by `key`. Numeric keys are sorted ascending; other
    /// keys keep first-appearance order.
    pub fn new(group_by: &str, samples: Vec<SampleMetrics>, key: impl Fn(&SampleMetrics) -> String) -> Self {
        let mut keys: Vec<String> = Vec::new();
        for s in &samples {
            let k = key(s);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let numeric: Option<Vec<f64>> = keys.iter().map(|k| k.parse::<f64>().ok()).collect();
        if let Some(values) = numeric {
            let mut order: Vec<usize> = (0..keys.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            keys = order.into_iter().map(|i| keys[i].clone()).collect();
        }
        let groups = keys
            .into_iter()
            .map(|k| {
                let members: Vec<&SampleMetrics> = samples.iter().filter(|s| key(s) == k).collect();
                let mse: Vec<f64> = members.iter().map(|s| s.mse).collect();
                let cc: Vec<f64> = members.iter().map(|s| s.cc).collect();
                let dice: Vec<f64> = members.iter().filter_map(|s| s.dice).collect();
                let (mse_mean, mse_std) = mean_std(&mse);
                let (cc_mean, cc_std) = mean_std(&cc);
                GroupSummary {
                    key: k,
                    count: members.len(),
                    mse_mean,
                    mse_std,
                    cc_mean,
                    cc_std,
                    dice_mean: (!dice.is_empty()).then(|| mean_std(&dice).0),
                }
            })
            .collect();
        Self {
            group_by: group_by.to_string(),
            cc_definition: Self::CC_DEFINITION,
            samples,
            groups,
        }
    }

    /// Columns: `id, origin, scar, axis, degrees, mse, cc, dice` (dice empty when unknown).
    pub fn samples_csv(&self) -> String {
        let mut s = String::from("id,origin,scar,axis,degrees,mse,cc,dice\n");
        for r in &self.samples {
            let dice = r.dice.map(|d| d.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{},{},{},{}", r.id, r.origin, r.scar, r.axis, r.degrees, r.mse, r.cc, dice);
        }
        s
    }

    /// Plot-ready columns: `<group_by>, count, mse_mean, mse_std, cc_mean, cc_std, dice_mean`.
    pub fn summary_csv(&self) -> String {
        let mut s = format!("{},count,mse_mean,mse_std,cc_mean,cc_std,dice_mean\n", self.group_by);
        for g in &self.groups {
            let dice = g.dice_mean.map(|d| d.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                g.key, g.count, g.mse_mean, g.mse_std, g.cc_mean, g.cc_std, dice
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// True when every metric is a finite number.
    pub fn is_finite(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.mse.is_finite() && s.cc.is_finite() && s.dice.is_none_or(f64::is_finite))
            && self
                .groups
                .iter()
                .all(|g| [g.mse_mean, g.mse_std, g.cc_mean, g.cc_std].iter().all(|v| v.is_finite()))
    }
}
