use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BasisError {
    #[error("parameter {0} outside [0, 1]")]
    OutOfDomain(f64),
    #[error("{num_bases} bases cannot carry degree {degree} (need at least degree + 1)")]
    TooFewBases { degree: usize, num_bases: usize },
}

/// Nonzero window of an open B-spline basis at one parameter value:
/// `values[r]` is basis function `first + r`, for `r` in `0..=degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisWindow {
    pub first: usize,
    pub values: Vec<f64>,
}

impl BasisWindow {
    /// Expands to all `num_bases` weights.
    pub fn dense(&self, num_bases: usize) -> Vec<f64> {
        let mut w = vec![0.0; num_bases];
        for (r, &v) in self.values.iter().enumerate() {
            w[self.first + r] = v;
        }
        w
    }
}

/// Open-uniform knot vector: `degree + 1` clamped knots at each end and
/// equidistant interior knots, `num_bases + degree + 1` knots in total.
pub fn open_uniform_knots(degree: usize, num_bases: usize) -> Vec<f64> {
    let spans = num_bases - degree;
    let mut knots = vec![0.0; degree + 1];
    knots.extend((1..spans).map(|i| i as f64 / spans as f64));
    knots.extend(std::iter::repeat_n(1.0, degree + 1));
    knots
}

/// Evaluates the `degree + 1` possibly-nonzero basis functions at `t`.
///
/// Uses the triangular (de Boor) recurrence on the open-uniform knot vector;
/// `t = 1` falls in the last span so the right end is interpolatory.
pub fn bspline_basis(t: f64, degree: usize, num_bases: usize) -> Result<BasisWindow, BasisError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(BasisError::OutOfDomain(t));
    }
    if num_bases < degree + 1 {
        return Err(BasisError::TooFewBases { degree, num_bases });
    }
    let spans = num_bases - degree;
    let knots = open_uniform_knots(degree, num_bases);
    // knot span index in [degree, num_bases - 1]
    let span = degree + ((t * spans as f64).floor() as usize).min(spans - 1);

    let mut values = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    values[0] = 1.0;
    for j in 1..=degree {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = values[r] / (right[r + 1] + left[j - r]);
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
    Ok(BasisWindow {
        first: span - degree,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cox-de Boor recursion straight from the definition.
    fn cox_de_boor(i: usize, p: usize, t: f64, knots: &[f64]) -> f64 {
        if p == 0 {
            let last = knots[knots.len() - 1];
            let in_span = knots[i] <= t && t < knots[i + 1];
            // right endpoint belongs to the last non-empty span
            let at_end = t == last && knots[i + 1] == last && knots[i] < last;
            return if in_span || at_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (t - knots[i]) / d1 * cox_de_boor(i, p - 1, t, knots);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - t) / d2 * cox_de_boor(i + 1, p - 1, t, knots);
        }
        v
    }

    #[test]
    fn linear_endpoints_and_midpoint() {
        assert_eq!(bspline_basis(0.0, 1, 2).unwrap().dense(2), vec![1.0, 0.0]);
        assert_eq!(bspline_basis(0.5, 1, 2).unwrap().dense(2), vec![0.5, 0.5]);
        assert_eq!(bspline_basis(1.0, 1, 2).unwrap().dense(2), vec![0.0, 1.0]);
    }

    #[test]
    fn matches_recursion_oracle() {
        for &(m, k) in &[(2, 5), (1, 5), (3, 7), (0, 4), (2, 3)] {
            let knots = open_uniform_knots(m, k);
            for &t in &[0.0, 0.37, 0.5, 0.61, 0.999, 1.0] {
                let got = bspline_basis(t, m, k).unwrap().dense(k);
                for (i, g) in got.iter().enumerate() {
                    let want = cox_de_boor(i, m, t, &knots);
                    assert!((g - want).abs() < 1e-12, "m={m} k={k} t={t} i={i}: {g} vs {want}");
                }
            }
        }
    }

    #[test]
    fn nonnegative_partition_of_unity() {
        for m in 0..4 {
            for k in (m + 1)..(m + 6) {
                for s in 0..=200 {
                    let t = s as f64 / 200.0;
                    let w = bspline_basis(t, m, k).unwrap();
                    assert!(w.values.iter().all(|&v| v >= 0.0));
                    assert!((w.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn domain_and_size_errors() {
        assert_eq!(bspline_basis(1.5, 1, 5), Err(BasisError::OutOfDomain(1.5)));
        assert_eq!(bspline_basis(-0.1, 1, 5), Err(BasisError::OutOfDomain(-0.1)));
        assert!(matches!(bspline_basis(0.5, 3, 3), Err(BasisError::TooFewBases { .. })));
    }
}
