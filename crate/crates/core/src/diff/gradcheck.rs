//! Central finite-difference checks of backward-pass gradients.

use ndarray::ArrayD;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DiffError, Tape, Var};
use crate::Scalar;

/// Worst-case agreement between analytic and finite-difference gradients for one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// max over elements of `|g_ad - g_fd| / max(1, |g_fd|)`
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub elements: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1.0)
}

/// Uniform `[-1, 1)` array used to reduce a tensor-valued operation to a scalar.
pub fn random_projection<T: Scalar>(shape: &[usize], seed: u64) -> ArrayD<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ArrayD::from_shape_simple_fn(shape, || T::of(rng.random_range(-1.0..1.0)))
}

/// Compares reverse-mode gradients of the scalar `f(inputs)` with central
/// differences of step `h`, perturbing every element of every input.
///
/// `f` receives fresh leaves for `inputs` on a new tape each evaluation.
pub fn check_gradients<T, F>(inputs: &[ArrayD<T>], h: f64, f: F) -> Result<Vec<GradCheck>, DiffError>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var, DiffError>,
{
    let eval = |xs: &[ArrayD<T>]| -> Result<f64, DiffError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).sum().as_f64())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut reports = Vec::with_capacity(inputs.len());
    let mut work: Vec<ArrayD<T>> = inputs.to_vec();
    for (i, (input, &var)) in inputs.iter().zip(&vars).enumerate() {
        let analytic = grads.get_or_zeros(var, input.shape());
        let mut report = GradCheck {
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            elements: input.len(),
        };
        for e in 0..input.len() {
            let orig = flat(input, e);
            set_flat(&mut work[i], e, orig + T::of(h));
            let plus = eval(&work)?;
            set_flat(&mut work[i], e, orig - T::of(h));
            let minus = eval(&work)?;
            set_flat(&mut work[i], e, orig);
            let numeric = (plus - minus) / (2.0 * h);
            let a = flat(&analytic, e).as_f64();
            report.max_rel_error = report.max_rel_error.max(relative_error(a, numeric));
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
        }
        reports.push(report);
    }
    Ok(reports)
}

fn flat<T: Scalar>(a: &ArrayD<T>, e: usize) -> T {
    match a.as_slice_memory_order() {
        Some(s) => s[e],
        None => a.iter().nth(e).copied().unwrap(),
    }
}

fn set_flat<T: Scalar>(a: &mut ArrayD<T>, e: usize, v: T) {
    match a.as_slice_memory_order_mut() {
        Some(s) => s[e] = v,
        None => *a.iter_mut().nth(e).unwrap() = v,
    }
}
