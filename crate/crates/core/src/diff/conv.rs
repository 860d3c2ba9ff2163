//! 1D convolution along time, applied per node with channel mixing.
//!
//! Tensors are `(nodes, channels, time)`; the convolution is a
//! cross-correlation (no kernel flip) lowered to a single matrix product via
//! an im2col buffer shared by all nodes.

use ndarray::{Array2, Array3, ArrayD, ArrayView3, Ix3};

use super::{shape_err, Backward, BackwardCtx, DiffError, Tape, Var};
use crate::Scalar;

/// `floor((len + 2 padding - width) / stride) + 1`, or `None` when the kernel
/// does not fit.
pub fn conv_output_len(len: usize, width: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = len + 2 * padding;
    (stride >= 1 && width >= 1 && width <= padded).then(|| (padded - width) / stride + 1)
}

/// `(len - 1) stride - 2 padding + width + output_padding`.
pub fn conv_transpose_output_len(
    len: usize,
    width: usize,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Option<usize> {
    ((len.max(1) - 1) * stride + width + output_padding).checked_sub(2 * padding)
}

#[derive(Clone, Copy)]
struct Geometry {
    nodes: usize,
    width: usize,
    stride: usize,
    padding: usize,
    /// time length of the dense (un-strided) side
    long: usize,
    /// time length of the strided side
    short: usize,
}

/// `col[c * width + k, n * short + t] = x[n, c, t * stride + k - padding]`.
fn im2col<T: Scalar>(x: ArrayView3<'_, T>, g: Geometry) -> Array2<T> {
    let channels = x.dim().1;
    let mut col = Array2::<T>::zeros((channels * g.width, g.nodes * g.short));
    for n in 0..g.nodes {
        for c in 0..channels {
            for k in 0..g.width {
                let mut row = col.row_mut(c * g.width + k);
                for t in 0..g.short {
                    let src = (t * g.stride + k) as isize - g.padding as isize;
                    if src >= 0 && (src as usize) < g.long {
                        row[n * g.short + t] = x[[n, c, src as usize]];
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatter-adds columns back into `(nodes, channels, long)`.
fn col2im<T: Scalar>(col: &Array2<T>, channels: usize, g: Geometry) -> Array3<T> {
    let mut x = Array3::<T>::zeros((g.nodes, channels, g.long));
    for n in 0..g.nodes {
        for c in 0..channels {
            for k in 0..g.width {
                let row = col.row(c * g.width + k);
                for t in 0..g.short {
                    let src = (t * g.stride + k) as isize - g.padding as isize;
                    if src >= 0 && (src as usize) < g.long {
                        x[[n, c, src as usize]] += row[n * g.short + t];
                    }
                }
            }
        }
    }
    x
}

/// `(nodes, channels, len)` -> `(channels, nodes * len)`.
fn to_channel_major<T: Scalar>(x: ArrayView3<'_, T>) -> Array2<T> {
    let (n, c, l) = x.dim();
    let p = x.permuted_axes([1, 0, 2]);
    p.as_standard_layout()
        .into_owned()
        .into_shape_with_order((c, n * l))
        .expect("contiguous reshape")
}

/// `(channels, nodes * len)` -> `(nodes, channels, len)`.
fn from_channel_major<T: Scalar>(m: Array2<T>, nodes: usize, len: usize) -> Array3<T> {
    let c = m.nrows();
    let a = m.into_shape_with_order((c, nodes, len)).expect("contiguous reshape");
    a.permuted_axes([1, 0, 2]).as_standard_layout().into_owned()
}

fn weight_matrix<T: Scalar>(w: ArrayView3<'_, T>) -> Array2<T> {
    let (a, b, k) = w.dim();
    w.as_standard_layout()
        .into_owned()
        .into_shape_with_order((a, b * k))
        .expect("contiguous reshape")
}

fn rank3<'a, T: Scalar>(op: &'static str, a: &'a ArrayD<T>) -> Result<ArrayView3<'a, T>, DiffError> {
    a.view()
        .into_dimensionality::<Ix3>()
        .map_err(|_| shape_err(op, format!("expected rank 3, got {:?}", a.shape())))
}

struct ConvOp {
    geom: Geometry,
}

impl<T: Scalar> Backward<T> for ConvOp {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>> {
        let x = ctx.inputs[0].view().into_dimensionality::<Ix3>().unwrap();
        let w = ctx.inputs[1].view().into_dimensionality::<Ix3>().unwrap();
        let dy = to_channel_major(ctx.grad.view().into_dimensionality::<Ix3>().unwrap());
        let (co, ci, width) = w.dim();
        let dx = ctx.needs[0].then(|| {
            let dcol = weight_matrix(w).t().dot(&dy);
            col2im(&dcol, ci, self.geom).into_dyn()
        });
        let dw = ctx.needs[1].then(|| {
            let col = im2col(x, self.geom);
            dy.dot(&col.t())
                .into_shape_with_order((co, ci, width))
                .unwrap()
                .into_dyn()
        });
        vec![dx, dw]
    }
}

struct ConvTransposeOp {
    geom: Geometry,
}

impl<T: Scalar> Backward<T> for ConvTransposeOp {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>> {
        let x = ctx.inputs[0].view().into_dimensionality::<Ix3>().unwrap();
        let w = ctx.inputs[1].view().into_dimensionality::<Ix3>().unwrap();
        let (ci, co, width) = w.dim();
        let gcol = im2col(ctx.grad.view().into_dimensionality::<Ix3>().unwrap(), self.geom);
        let dx = ctx.needs[0].then(|| {
            let m = weight_matrix(w).dot(&gcol);
            from_channel_major(m, self.geom.nodes, self.geom.short).into_dyn()
        });
        let dw = ctx.needs[1].then(|| {
            to_channel_major(x)
                .dot(&gcol.t())
                .into_shape_with_order((ci, co, width))
                .unwrap()
                .into_dyn()
        });
        vec![dx, dw]
    }
}

impl<T: Scalar> Tape<T> {
    /// Strided, zero-padded cross-correlation along time.
    ///
    /// `x`: `(nodes, in_ch, len)`, `w`: `(out_ch, in_ch, width)`; output
    /// `(nodes, out_ch, conv_output_len(len, width, stride, padding))`.
    pub fn temporal_conv(&mut self, x: Var, w: Var, stride: usize, padding: usize) -> Result<Var, DiffError> {
        let xv = rank3("temporal_conv", self.value(x))?;
        let wv = rank3("temporal_conv", self.value(w))?;
        let (nodes, ci, len) = xv.dim();
        let (co, wci, width) = wv.dim();
        if wci != ci {
            return Err(shape_err("temporal_conv", format!("input has {ci} channels, kernel expects {wci}")));
        }
        let short = conv_output_len(len, width, stride, padding).ok_or_else(|| {
            shape_err(
                "temporal_conv",
                format!("width {width}, stride {stride} invalid for length {len} with padding {padding}"),
            )
        })?;
        let geom = Geometry {
            nodes,
            width,
            stride,
            padding,
            long: len,
            short,
        };
        let y = weight_matrix(wv).dot(&im2col(xv, geom));
        debug_assert_eq!(y.dim(), (co, nodes * short));
        let out = from_channel_major(y, nodes, short).into_dyn();
        Ok(self.record(out, vec![x, w], ConvOp { geom }))
    }

    /// Adjoint of [`Tape::temporal_conv`] with the same weights and parameters:
    /// `x`: `(nodes, c_a, len)`, `w`: `(c_a, c_b, width)`, output
    /// `(nodes, c_b, out_len)` where `temporal_conv` maps length `out_len`
    /// back to `len`.
    pub fn temporal_conv_transpose(
        &mut self,
        x: Var,
        w: Var,
        stride: usize,
        padding: usize,
        out_len: usize,
    ) -> Result<Var, DiffError> {
        let xv = rank3("temporal_conv_transpose", self.value(x))?;
        let wv = rank3("temporal_conv_transpose", self.value(w))?;
        let (nodes, ci, len) = xv.dim();
        let (wci, co, width) = wv.dim();
        if wci != ci {
            return Err(shape_err(
                "temporal_conv_transpose",
                format!("input has {ci} channels, kernel expects {wci}"),
            ));
        }
        if conv_output_len(out_len, width, stride, padding) != Some(len) {
            return Err(shape_err(
                "temporal_conv_transpose",
                format!("output length {out_len} does not compress to input length {len}"),
            ));
        }
        let geom = Geometry {
            nodes,
            width,
            stride,
            padding,
            long: out_len,
            short: len,
        };
        let col = weight_matrix(wv).t().dot(&to_channel_major(xv));
        let out = col2im(&col, co, geom).into_dyn();
        Ok(self.record(out, vec![x, w], ConvTransposeOp { geom }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> ArrayD<f64> {
        ArrayD::from_shape_simple_fn(shape, || rng.random_range(-1.0..1.0))
    }

    /// Direct nested-loop reference.
    fn conv_oracle(x: &ArrayD<f64>, w: &ArrayD<f64>, stride: usize, padding: usize) -> ArrayD<f64> {
        let (n, ci, l) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (co, _, width) = (w.shape()[0], w.shape()[1], w.shape()[2]);
        let lo = (l + 2 * padding - width) / stride + 1;
        let mut y = ArrayD::zeros(vec![n, co, lo]);
        for a in 0..n {
            for o in 0..co {
                for t in 0..lo {
                    let mut s = 0.0;
                    for i in 0..ci {
                        for k in 0..width {
                            let src = (t * stride + k) as isize - padding as isize;
                            if src >= 0 && (src as usize) < l {
                                s += w[[o, i, k]] * x[[a, i, src as usize]];
                            }
                        }
                    }
                    y[[a, o, t]] = s;
                }
            }
        }
        y
    }

    #[test]
    fn output_length_formula() {
        assert_eq!(conv_output_len(60, 5, 2, 2), Some(30));
        assert_eq!(conv_output_len(30, 5, 2, 2), Some(15));
        assert_eq!(conv_output_len(15, 5, 2, 2), Some(8));
        assert_eq!(conv_output_len(2, 5, 1, 0), None);
        assert_eq!(conv_transpose_output_len(4, 1, 2, 0, 0), Some(7));
    }

    #[test]
    fn identity_and_zero_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0 = random(&[3, 2, 7], &mut rng);
        let mut id = ArrayD::zeros(vec![2, 2, 1]);
        id[[0, 0, 0]] = 1.0;
        id[[1, 1, 0]] = 1.0;
        let mut tape = Tape::new();
        let x = tape.leaf(x0.clone());
        let w = tape.leaf(id);
        let y = tape.temporal_conv(x, w, 1, 0).unwrap();
        assert_eq!(tape.value(y), &x0);
        let z = tape.leaf(ArrayD::zeros(vec![4, 2, 3]));
        let y = tape.temporal_conv(x, z, 2, 1).unwrap();
        assert!(tape.value(y).iter().all(|&v| v == 0.0));
        let yt = tape.temporal_conv_transpose(y, z, 2, 1, 7).unwrap();
        assert!(tape.value(yt).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x0 = random(&[1, 2, 8], &mut rng);
        let w0 = random(&[3, 2, 3], &mut rng);
        let mut tape = Tape::new();
        let x = tape.leaf(x0.clone());
        let w = tape.leaf(w0.clone());
        let y = tape.temporal_conv(x, w, 2, 1).unwrap();
        let expected = conv_oracle(&x0, &w0, 2, 1);
        assert_eq!(tape.shape(y), expected.shape());
        for (a, b) in tape.value(y).iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(l, width, stride, padding) in &[(8, 3, 2, 1), (60, 5, 2, 2), (15, 5, 2, 2), (9, 1, 1, 0), (10, 4, 3, 0)] {
            let x0 = random(&[4, 3, l], &mut rng);
            let w0 = random(&[2, 3, width], &mut rng);
            let lo = conv_output_len(l, width, stride, padding).unwrap();
            let y0 = random(&[4, 2, lo], &mut rng);
            let mut tape = Tape::new();
            let x = tape.leaf(x0.clone());
            let w = tape.leaf(w0.clone());
            let y = tape.leaf(y0.clone());
            let cx = tape.temporal_conv(x, w, stride, padding).unwrap();
            let ty = tape.temporal_conv_transpose(y, w, stride, padding, l).unwrap();
            let lhs: f64 = (tape.value(cx) * &y0).sum();
            let rhs: f64 = (tape.value(ty) * &x0).sum();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn stride_two_unit_kernel_interleaves_zeros() {
        let x0 = Array::from_shape_vec((1, 1, 4), vec![1.0, 2.0, 3.0, 4.0]).unwrap().into_dyn();
        let mut tape = Tape::new();
        let x = tape.leaf(x0);
        let w = tape.leaf(ArrayD::from_elem(vec![1, 1, 1], 1.0));
        let y = tape.temporal_conv_transpose(x, w, 2, 0, 7).unwrap();
        let got: Vec<f64> = tape.value(y).iter().copied().collect();
        assert_eq!(got, vec![1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 4.0]);
    }

    #[test]
    fn shape_errors() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(ArrayD::zeros(vec![2, 3, 5]));
        let w = tape.leaf(ArrayD::zeros(vec![2, 2, 3]));
        assert!(tape.temporal_conv(x, w, 1, 0).is_err());
        let w = tape.leaf(ArrayD::zeros(vec![2, 3, 9]));
        assert!(tape.temporal_conv(x, w, 1, 0).is_err());
        let w = tape.leaf(ArrayD::zeros(vec![3, 2, 3]));
        assert!(tape.temporal_conv_transpose(x, w, 2, 1, 7).is_err());
    }
}
