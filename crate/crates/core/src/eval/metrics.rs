use ndarray::ArrayD;

use super::EvalError;
use crate::Scalar;

fn check<T: Scalar>(a: &ArrayD<T>, b: &ArrayD<T>) -> Result<(), EvalError> {
    if a.shape() != b.shape() {
        return Err(EvalError::ShapeMismatch {
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// Mean squared difference over all elements.
pub fn mse_metric<T: Scalar>(x_hat: &ArrayD<T>, x: &ArrayD<T>) -> Result<f64, EvalError> {
    check(x_hat, x)?;
    let n = x.len().max(1) as f64;
    Ok(x_hat.iter().zip(x).map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2)).sum::<f64>() / n)
}

/// Pearson correlation over the flattened space-time block.
pub fn cc_metric<T: Scalar>(x_hat: &ArrayD<T>, x: &ArrayD<T>) -> Result<f64, EvalError> {
    check(x_hat, x)?;
    let n = x.len() as f64;
    let mean = |a: &ArrayD<T>| a.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let (ma, mb) = (mean(x_hat), mean(x));
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (a, b) in x_hat.iter().zip(x) {
        let (da, db) = (a.as_f64() - ma, b.as_f64() - mb);
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if vb == 0.0 {
        return Err(EvalError::ZeroVariance("reference"));
    }
    if va == 0.0 {
        return Err(EvalError::ZeroVariance("reconstruction"));
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::gradcheck::random_projection;
    use proptest::prelude::*;

    #[test]
    fn cc_examples() {
        let x = random_projection::<f64>(&[5, 1, 7], 1);
        assert!((cc_metric(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let centered = &x - x.mean().unwrap();
        assert!((cc_metric(&(-&centered), &centered).unwrap() + 1.0).abs() < 1e-12);
        assert!((cc_metric(&(&x * 2.0 + 3.0), &x).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(cc_metric(&x, &ArrayD::zeros(vec![5, 1, 7])), Err(EvalError::ZeroVariance(_))));
        assert!(cc_metric(&x, &ArrayD::zeros(vec![5, 1, 6])).is_err());
    }

    #[test]
    fn mse_examples() {
        let one = ArrayD::from_elem(vec![1], 1.0);
        let zero = ArrayD::from_elem(vec![1], 0.0);
        assert_eq!(mse_metric(&one, &zero).unwrap(), 1.0);
        let x = random_projection::<f64>(&[3, 1, 4], 2);
        assert_eq!(mse_metric(&x, &x).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn cc_is_affine_invariant(seed in 0u64..500, s1 in 0.1f64..10.0, o1 in -5.0f64..5.0, s2 in 0.1f64..10.0, o2 in -5.0f64..5.0) {
            let a = random_projection::<f64>(&[4, 1, 9], seed);
            let b = random_projection::<f64>(&[4, 1, 9], seed + 1000);
            let base = cc_metric(&a, &b).unwrap();
            let moved = cc_metric(&(&a * s1 + o1), &(&b * s2 + o2)).unwrap();
            prop_assert!((base - moved).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&base));
        }
    }
}
