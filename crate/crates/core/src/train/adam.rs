use ndarray::{ArrayD, Zip};
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::network::ModelParams;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Step count and first/second moments, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<ArrayD<T>>,
    pub v: Vec<ArrayD<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        let zeros: Vec<_> = params.tensors().iter().map(|(_, t)| ArrayD::zeros(t.shape())).collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Bias-corrected update in place:
    /// `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn update(&mut self, params: &mut ModelParams<T>, grads: &[ArrayD<T>], config: &AdamConfig) -> Result<(), TrainError> {
        assert_eq!(grads.len(), self.m.len(), "one gradient per parameter");
        for ((name, _), g) in params.tensors().iter().zip(grads) {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(TrainError::NonFiniteGradient {
                    name: name.clone(),
                    step: self.step,
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::of(config.beta1), T::of(config.beta2));
        let c1 = T::one() / (T::one() - b1.powi(t));
        let c2 = T::one() / (T::one() - b2.powi(t));
        let (lr, eps) = (T::of(config.lr), T::of(config.eps));
        for (((p, g), m), v) in params.values_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                *p -= lr * (*m * c1) / ((*v * c2).sqrt() + eps);
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ModelConfig;

    fn single(x: f64) -> (ModelParams<f64>, ModelConfig) {
        // smallest real configuration; only the first tensor is used
        let config = ModelConfig::narrow(1, 8);
        let mut p = ModelParams::zeros(&config);
        p.values_mut().next().unwrap()[[0, 0, 0]] = x;
        (p, config)
    }

    fn grads_for(p: &ModelParams<f64>, first: f64) -> Vec<ArrayD<f64>> {
        let mut g: Vec<_> = p.tensors().iter().map(|(_, t)| ArrayD::zeros(t.shape())).collect();
        g[0][[0, 0, 0]] = first;
        g
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let (mut p, _) = single(0.3);
        let before = p.clone();
        let mut s = AdamState::new(&p);
        s.update(&mut p, &grads_for(&before, 0.0), &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [3.0, -0.01, 1e4] {
            let (mut p, _) = single(0.0);
            let mut s = AdamState::new(&p);
            let grads = grads_for(&p, g);
            s.update(&mut p, &grads, &AdamConfig::default()).unwrap();
            let moved = p.tensors()[0].1[[0, 0, 0]];
            assert!((moved + 5e-4 * g.signum()).abs() < 2e-8 * 5e-4 / g.abs() + 1e-15, "{g}: {moved}");
        }
    }

    /// Scalar Adam on `f(x) = x^2` written out directly.
    fn scalar_oracle(x0: f64, steps: usize) -> f64 {
        let (lr, b1, b2, eps) = (5e-4, 0.9, 0.999, 1e-8);
        let (mut x, mut m, mut v) = (x0, 0.0, 0.0);
        for t in 1..=steps {
            let g = 2.0 * x;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            x -= lr * mh / (vh.sqrt() + eps);
        }
        x
    }

    #[test]
    fn quadratic_descent_matches_scalar_recursion() {
        let (mut p, _) = single(1.0);
        let mut s = AdamState::new(&p);
        for _ in 0..500 {
            let x = p.tensors()[0].1[[0, 0, 0]];
            let grads = grads_for(&p, 2.0 * x);
            s.update(&mut p, &grads, &AdamConfig::default()).unwrap();
        }
        let x = p.tensors()[0].1[[0, 0, 0]];
        let want = scalar_oracle(1.0, 500);
        assert!((x - want).abs() < 1e-12);
        // each step moves at most about lr, so 500 steps cover roughly 0.25
        assert!(x < 1.0 && x > 0.7, "{x}");
        assert!(scalar_oracle(1.0, 5000).abs() < 0.1);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let (mut p, _) = single(0.0);
        let mut s = AdamState::new(&p);
        let grads = grads_for(&p, f64::NAN);
        assert!(matches!(s.update(&mut p, &grads, &AdamConfig::default()), Err(TrainError::NonFiniteGradient { step: 0, .. })));
        assert_eq!(s.step, 0);
    }
}
