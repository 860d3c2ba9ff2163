//! Continuous spline kernels over edge pseudo-coordinates.
//!
//! A kernel assigns every `u` in `[0, 1]^3` the matrix
//! `g(u) = sum_p w_p B_p(u)` where `B_p` is a product of three open B-spline
//! bases and `w_p` is an `in x out` weight slice. Because the kernel is a
//! function of local geometry rather than of vertex identity, the same
//! weights apply to any graph.

mod basis;
mod conv;

use ndarray::{Array2, ArrayD, Axis, Ix3};
use serde::{Deserialize, Serialize};

use crate::Scalar;

pub use basis::{bspline_basis, open_uniform_knots, BasisError, BasisWindow};
pub use conv::EdgeBasis;

/// Degree and per-dimension basis counts of a spline kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineShape {
    pub degree: usize,
    pub kernel_size: [usize; 3],
}

impl Default for SplineShape {
    fn default() -> Self {
        Self {
            degree: 1,
            kernel_size: [5; 3],
        }
    }
}

impl SplineShape {
    pub fn num_bases(&self) -> usize {
        self.kernel_size.iter().product()
    }

    /// Nonzero basis products per pseudo-coordinate, `(degree + 1)^3`.
    pub fn support(&self) -> usize {
        (self.degree + 1).pow(3)
    }

    pub fn validate(&self) -> Result<(), BasisError> {
        for &k in &self.kernel_size {
            if k < self.degree + 1 {
                return Err(BasisError::TooFewBases {
                    degree: self.degree,
                    num_bases: k,
                });
            }
        }
        Ok(())
    }

    /// The `(degree + 1)^3` products `B_p(u)` with their flat indices
    /// `p = (p1 k2 + p2) k3 + p3`.
    pub fn basis_products(&self, u: [f64; 3]) -> Result<Vec<(usize, f64)>, BasisError> {
        let w: Vec<BasisWindow> = (0..3)
            .map(|d| bspline_basis(u[d], self.degree, self.kernel_size[d]))
            .collect::<Result<_, _>>()?;
        let [_, k2, k3] = self.kernel_size;
        let mut out = Vec::with_capacity(self.support());
        for (a, va) in w[0].values.iter().enumerate() {
            for (b, vb) in w[1].values.iter().enumerate() {
                for (c, vc) in w[2].values.iter().enumerate() {
                    let p = ((w[0].first + a) * k2 + w[1].first + b) * k3 + w[2].first + c;
                    out.push((p, va * vb * vc));
                }
            }
        }
        Ok(out)
    }
}

/// Spline kernel with its weights `(num_bases, in_channels, out_channels)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineKernel<T> {
    pub shape: SplineShape,
    pub weights: ArrayD<T>,
}

impl<T: Scalar> SplineKernel<T> {
    pub fn zeros(shape: SplineShape, in_channels: usize, out_channels: usize) -> Self {
        Self {
            shape,
            weights: ArrayD::zeros(vec![shape.num_bases(), in_channels, out_channels]),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[2]
    }
}

/// Kernel matrix `g(u)`, `in x out`.
pub fn spline_weight<T: Scalar>(u: [f64; 3], kernel: &SplineKernel<T>) -> Result<Array2<T>, BasisError> {
    let w = kernel.weights.view().into_dimensionality::<Ix3>().expect("rank-3 kernel weights");
    let mut g = Array2::zeros((w.dim().1, w.dim().2));
    for (p, b) in kernel.shape.basis_products(u)? {
        g.scaled_add(T::of(b), &w.index_axis(Axis(0), p));
    }
    Ok(g)
}
