use ndarray::ArrayD;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, NetworkError};
use crate::Scalar;

/// Named trainable tensors in the order of [`ModelConfig::param_specs`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    tensors: Vec<(String, ArrayD<T>)>,
}

impl<T: Scalar> ModelParams<T> {
    /// Uniform in `[-b, b]` with `b = (fan_in * support)^(-1/2)`, drawn
    /// sequentially from one seeded stream.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = config
            .param_specs()
            .into_iter()
            .map(|spec| {
                let bound = 1.0 / (spec.fan.max(1) as f64).sqrt();
                let t = ArrayD::from_shape_simple_fn(spec.shape, || T::of(rng.random_range(-bound..=bound)));
                (spec.name, t)
            })
            .collect();
        Self { tensors }
    }

    pub fn zeros(config: &ModelConfig) -> Self {
        let tensors = config
            .param_specs()
            .into_iter()
            .map(|s| (s.name, ArrayD::zeros(s.shape)))
            .collect();
        Self { tensors }
    }

    /// Checks names, order and shapes against `config`.
    pub fn from_named(config: &ModelConfig, tensors: Vec<(String, ArrayD<T>)>) -> Result<Self, NetworkError> {
        let specs = config.param_specs();
        if specs.len() != tensors.len() {
            return Err(NetworkError::Parameters(format!(
                "expected {} tensors, got {}",
                specs.len(),
                tensors.len()
            )));
        }
        for (spec, (name, t)) in specs.iter().zip(&tensors) {
            if &spec.name != name || spec.shape != t.shape() {
                return Err(NetworkError::Parameters(format!(
                    "expected {} {:?}, got {name} {:?}",
                    spec.name,
                    spec.shape,
                    t.shape()
                )));
            }
        }
        Ok(Self { tensors })
    }

    pub fn get(&self, name: &str) -> Option<&ArrayD<T>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ArrayD<T>> {
        self.tensors.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn tensors(&self) -> &[(String, ArrayD<T>)] {
        &self.tensors
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut ArrayD<T>> {
        self.tensors.iter_mut().map(|(_, t)| t)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.len()).sum()
    }
}
