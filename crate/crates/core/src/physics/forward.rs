use ndarray::{Array2, ArrayD, Axis, Ix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::PhysicsError;
use crate::mesh::{distance, Point};
use crate::Scalar;

/// Dense `torso x heart` operator with rows `H_ij = r_ij^-1 / sum_k r_ik^-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOperator<T> {
    matrix: Array2<T>,
}

impl<T: Scalar> ForwardOperator<T> {
    pub fn build(heart: &[Point], torso: &[Point]) -> Result<Self, PhysicsError> {
        let mut matrix = Array2::zeros((torso.len(), heart.len()));
        for (i, &t) in torso.iter().enumerate() {
            let inv: Vec<f64> = heart
                .iter()
                .enumerate()
                .map(|(j, &h)| match distance(t, h) {
                    r if r > 0.0 => Ok(1.0 / r),
                    _ => Err(PhysicsError::Coincident { torso: i, heart: j }),
                })
                .collect::<Result<_, _>>()?;
            let total: f64 = inv.iter().sum();
            for (j, w) in inv.into_iter().enumerate() {
                matrix[[i, j]] = T::of(w / total);
            }
        }
        Ok(Self { matrix })
    }

    pub fn from_matrix(matrix: Array2<T>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.matrix
    }

    pub fn num_torso(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_heart(&self) -> usize {
        self.matrix.ncols()
    }
}

/// `Y_t = H X_t` for every frame of a `(heart, 1, T)` tensor.
pub fn apply_forward<T: Scalar>(op: &ForwardOperator<T>, x: &ArrayD<T>) -> Result<ArrayD<T>, PhysicsError> {
    let mismatch = || PhysicsError::ShapeMismatch {
        expected: op.num_heart(),
        found: x.shape().to_vec(),
    };
    let x3 = x.view().into_dimensionality::<Ix3>().map_err(|_| mismatch())?;
    if x3.dim().0 != op.num_heart() || x3.dim().1 != 1 {
        return Err(mismatch());
    }
    let y = op.matrix.dot(&x3.index_axis(Axis(1), 0));
    Ok(y.insert_axis(Axis(1)).into_dyn())
}

/// Mean squared value over the whole block.
pub fn signal_power<T: Scalar>(y: &ArrayD<T>) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    y.iter().map(|v| v.as_f64().powi(2)).sum::<f64>() / y.len() as f64
}

/// Adds white Gaussian noise of power `signal_power / 10^(snr_db / 10)`.
/// An infinite SNR returns the input unchanged.
pub fn add_noise<T: Scalar>(y: &ArrayD<T>, snr_db: f64, seed: u64) -> Result<ArrayD<T>, PhysicsError> {
    if snr_db == f64::INFINITY {
        return Ok(y.clone());
    }
    let power = signal_power(y);
    if power == 0.0 || !power.is_finite() {
        return Err(PhysicsError::ZeroPower);
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(y.mapv(|v| {
        let z: f64 = StandardNormal.sample(&mut rng);
        T::of(v.as_f64() + sigma * z)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::gradcheck::random_projection;
    use proptest::prelude::*;

    #[test]
    fn row_examples() {
        let h = ForwardOperator::<f64>::build(&[[1.0, 0.0, 0.0], [-3.0, 0.0, 0.0]], &[[0.0; 3]]).unwrap();
        assert!((h.matrix()[[0, 0]] - 0.75).abs() < 1e-15);
        assert!((h.matrix()[[0, 1]] - 0.25).abs() < 1e-15);

        let heart = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0], [-1.0, 0.0, 0.0]];
        let h = ForwardOperator::<f64>::build(&heart, &[[0.0; 3]]).unwrap();
        assert!(h.matrix().iter().all(|&w| (w - 0.25).abs() < 1e-15));

        let err = ForwardOperator::<f64>::build(&heart, &[[0.0, 1.0, 0.0]]).unwrap_err();
        assert!(matches!(err, PhysicsError::Coincident { torso: 0, heart: 1 }));
    }

    #[test]
    fn apply_matches_loop_and_permutes() {
        let m = random_projection::<f64>(&[4, 3], 3).into_dimensionality().unwrap();
        let h = ForwardOperator::from_matrix(m);
        let x = random_projection::<f64>(&[3, 1, 5], 4);
        let y = apply_forward(&h, &x).unwrap();
        for i in 0..4 {
            for t in 0..5 {
                let want: f64 = (0..3).map(|j| h.matrix()[[i, j]] * x[[j, 0, t]]).sum();
                assert!((y[[i, 0, t]] - want).abs() < 1e-14);
            }
        }
        let perm = ndarray::array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let y = apply_forward(&ForwardOperator::from_matrix(perm), &x).unwrap();
        for t in 0..5 {
            assert_eq!(y[[0, 0, t]], x[[1, 0, t]]);
            assert_eq!(y[[2, 0, t]], x[[0, 0, t]]);
        }
        assert!(apply_forward(&h, &ArrayD::zeros(vec![3, 1, 5])).unwrap().iter().all(|&v| v == 0.0));
        assert!(apply_forward(&h, &ArrayD::zeros(vec![4, 1, 5])).is_err());
    }

    #[test]
    fn noise_power_at_20_db() {
        let y = random_projection::<f64>(&[1000, 1, 100], 5);
        let noisy = add_noise(&y, 20.0, 6).unwrap();
        let noise = &noisy - &y;
        let ratio = signal_power(&y) / signal_power(&noise);
        assert!((ratio / 100.0 - 1.0).abs() < 0.1, "{ratio}");
        assert_eq!(noisy, add_noise(&y, 20.0, 6).unwrap());
        assert_eq!(add_noise(&y, f64::INFINITY, 6).unwrap(), y);
        assert!(matches!(add_noise(&ArrayD::<f64>::zeros(vec![3, 1, 2]), 20.0, 1), Err(PhysicsError::ZeroPower)));
    }

    proptest! {
        #[test]
        fn constant_potential_is_a_fixed_point(c in -5.0f64..5.0, seed in 0u64..1000) {
            let heart: Vec<Point> = random_projection::<f64>(&[6, 3], seed)
                .rows().into_iter().map(|r| [r[0], r[1], r[2]]).collect();
            let torso: Vec<Point> = random_projection::<f64>(&[9, 3], seed + 1)
                .rows().into_iter().map(|r| [3.0 * r[0], 3.0 * r[1] + 4.0, 3.0 * r[2]]).collect();
            let h = ForwardOperator::<f64>::build(&heart, &torso).unwrap();
            for row in h.matrix().rows() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-12);
                prop_assert!(row.iter().all(|&w| w >= 0.0));
            }
            let x = ArrayD::from_elem(vec![6, 1, 3], c);
            let y = apply_forward(&h, &x).unwrap();
            prop_assert!(y.iter().all(|&v| (v - c).abs() < 1e-12));

            let x = random_projection::<f64>(&[6, 1, 4], seed + 2);
            let y = apply_forward(&h, &x).unwrap();
            for t in 0..4 {
                let col = x.index_axis(Axis(2), t);
                let (lo, hi) = col.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
                for i in 0..9 {
                    prop_assert!(y[[i, 0, t]] <= hi + 1e-12 && y[[i, 0, t]] >= lo - 1e-12);
                }
            }
        }

        #[test]
        fn noise_scales_with_signal(scale in 0.1f64..10.0, seed in 0u64..100) {
            let y = random_projection::<f64>(&[5, 1, 8], seed);
            let n1 = &add_noise(&y, 20.0, seed).unwrap() - &y;
            let ys = &y * scale;
            let n2 = &add_noise(&ys, 20.0, seed).unwrap() - &ys;
            for (a, b) in n1.iter().zip(n2.iter()) {
                prop_assert!((a * scale - b).abs() < 1e-9);
            }
        }
    }
}
