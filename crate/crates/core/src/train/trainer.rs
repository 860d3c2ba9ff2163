use std::fmt::Write as _;
use std::path::Path;

use ndarray::ArrayD;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AdamConfig, Checkpoint, EpochRecord, TrainError};
use crate::data::{derive_seed, Sample};
use crate::network::{GeometryBundle, GeometrySet};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// total epochs; resuming continues up to this count
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// write `last.ckpt` every this many epochs (0: only at the end)
    pub save_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 8,
            adam: AdamConfig::default(),
            save_every: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub last: Checkpoint<T>,
    /// lowest epoch loss seen; equals `last` before any epoch ran
    pub best: Checkpoint<T>,
}

/// `epoch,loss` rows, one per completed epoch.
pub fn write_history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss\n");
    for h in history {
        let _ = writeln!(s, "{},{}", h.epoch, h.loss);
    }
    s
}

fn save_all<T: Scalar>(dir: &Path, last: &Checkpoint<T>, best: Option<&Checkpoint<T>>) -> Result<(), TrainError> {
    std::fs::create_dir_all(dir).map_err(|source| TrainError::Io { path: dir.to_path_buf(), source })?;
    last.save(&dir.join("last.ckpt"))?;
    if let Some(b) = best {
        b.save(&dir.join("best.ckpt"))?;
    }
    let path = dir.join("history.csv");
    std::fs::write(&path, write_history_csv(&last.history)).map_err(|source| TrainError::Io { path, source })
}

fn geometry_for<'a, T: Scalar>(
    set: &'a GeometrySet<T>,
    sample: &Sample<T>,
) -> Result<&'a GeometryBundle<T>, TrainError> {
    set.get(sample.meta.axis, sample.meta.degrees)
        .map(|g| g.as_ref())
        .ok_or(TrainError::MissingGeometry {
            axis: sample.meta.axis,
            degrees: sample.meta.degrees,
        })
}

/// Runs epochs `start.epoch + 1 ..= config.epochs` with per-epoch shuffled
/// mini-batches. The batch loss is the sum of per-sample element-mean
/// squared errors; per-sample gradients are computed in parallel and summed
/// in batch order, so results do not depend on the worker count.
pub fn train<T: Scalar>(
    start: Checkpoint<T>,
    geometries: &GeometrySet<T>,
    samples: &[Sample<T>],
    config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome<T>, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if config.batch_size == 0 {
        return Err(TrainError::InvalidConfig("batch_size must be positive".into()));
    }
    start.check_geometry(geometries.base().hash())?;
    let bundles = samples.iter().map(|s| geometry_for(geometries, s)).collect::<Result<Vec<_>, _>>()?;
    let mut model = start.model()?;
    let mut state = start;
    state.adam_config = config.adam;
    let mut best: Option<Checkpoint<T>> = None;
    let best_loss = |b: &Option<Checkpoint<T>>| b.as_ref().and_then(|c| c.history.last()).map_or(f64::INFINITY, |h| h.loss);

    while state.epoch < config.epochs {
        let epoch = state.epoch + 1;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(state.seed, &format!("epoch/{epoch}"))));
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let results = batch
                .par_iter()
                .map(|&i| model.loss_and_gradients(bundles[i], &samples[i].y, &samples[i].x))
                .collect::<Result<Vec<_>, _>>()?;
            let mut grads: Option<Vec<ArrayD<T>>> = None;
            let mut batch_loss = 0.0;
            for (loss, g) in results {
                batch_loss += loss.as_f64();
                match &mut grads {
                    None => grads = Some(g),
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                }
            }
            if !batch_loss.is_finite() {
                if let Some(dir) = out_dir {
                    save_all(dir, &state, best.as_ref())?;
                }
                return Err(TrainError::Diverged { epoch });
            }
            state.adam.update(model.params_mut(), &grads.expect("non-empty batch"), &config.adam)?;
            total += batch_loss;
        }
        state.params = model.params().clone();
        state.epoch = epoch;
        let loss = total / samples.len() as f64;
        state.history.push(EpochRecord { epoch, loss });
        log::info!("epoch {epoch}: loss {loss:.6e}");
        if loss < best_loss(&best) {
            best = Some(state.clone());
        }
        if let Some(dir) = out_dir {
            if config.save_every > 0 && epoch.is_multiple_of(config.save_every) {
                save_all(dir, &state, best.as_ref())?;
            }
        }
    }
    if let Some(dir) = out_dir {
        save_all(dir, &state, best.as_ref())?;
    }
    let best = best.unwrap_or_else(|| state.clone());
    Ok(TrainOutcome { last: state, best })
}
