use std::sync::Arc;

use ndarray::{Array3, ArrayD, Axis, Ix3, IxDyn, Zip};

use super::{shape_err, Backward, BackwardCtx, DiffError, Tape, Var};
use crate::mesh::PoolingMap;
use crate::Scalar;

fn same_shape<T: Scalar>(tape: &Tape<T>, op: &'static str, a: Var, b: Var) -> Result<(), DiffError> {
    if tape.shape(a) != tape.shape(b) {
        return Err(shape_err(op, format!("{:?} vs {:?}", tape.shape(a), tape.shape(b))));
    }
    Ok(())
}

struct AddOp;
impl<T: Scalar> Backward<T> for AddOp {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>> {
        ctx.needs.iter().map(|&n| n.then(|| ctx.grad.clone())).collect()
    }
}

struct SubOp;
impl<T: Scalar> Backward<T> for SubOp {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>> {
        vec![
            ctx.needs[0].then(|| ctx.grad.clone()),
            ctx.needs[1].then(|| ctx.grad.mapv(|g| -g)),
        ]
    }
}

struct MulOp;
impl<T: Scalar> Backward<T> for MulOp {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>> {
        vec![
            ctx.needs[0].then(|| ctx.grad * ctx.inputs[1]),
            ctx.needs[1].then(|| ctx.grad * ctx.inputs[0]),
        ]
    }
}

struct ScaleOp<T>(T);
impl<T: Scalar> Backward<T> for ScaleOp<T> {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>> {
        vec![ctx.needs[0].then(|| ctx.grad.mapv(|g| g * self.0))]
    }
}

struct SumOp;
impl<T: Scalar> Backward<T> for SumOp {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>> {
        let g = ctx.grad.iter().next().copied().unwrap_or_else(T::zero);
        vec![ctx.needs[0].then(|| ArrayD::from_elem(ctx.inputs[0].shape(), g))]
    }
}

struct ProjectOp<T>(ArrayD<T>);
impl<T: Scalar> Backward<T> for ProjectOp<T> {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>> {
        let g = ctx.grad.iter().next().copied().unwrap_or_else(T::zero);
        vec![ctx.needs[0].then(|| self.0.mapv(|r| r * g))]
    }
}

struct EluOp;
impl<T: Scalar> Backward<T> for EluOp {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>> {
        if !ctx.needs[0] {
            return vec![None];
        }
        let mut g = ctx.grad.clone();
        Zip::from(&mut g)
            .and(ctx.inputs[0])
            .and(ctx.output)
            .for_each(|g, &x, &y| {
                // d/dx (e^x - 1) = e^x = y + 1
                if x <= T::zero() {
                    *g *= y + T::one();
                }
            });
        vec![Some(g)]
    }
}

struct MseOp<T>(ArrayD<T>);
impl<T: Scalar> Backward<T> for MseOp<T> {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>> {
        let g = ctx.grad.iter().next().copied().unwrap_or_else(T::zero);
        let n = T::of(self.0.len() as f64);
        let k = (T::one() + T::one()) * g / n;
        vec![ctx.needs[0].then(|| {
            let mut d = ctx.inputs[0] - &self.0;
            d.mapv_inplace(|x| x * k);
            d
        })]
    }
}

struct PoolOp(Arc<PoolingMap>);
impl<T: Scalar> Backward<T> for PoolOp {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>> {
        if !ctx.needs[0] {
            return vec![None];
        }
        // adjoint of cluster mean: each fine node gets its cluster's gradient / size
        let g = ctx.grad.view().into_dimensionality::<Ix3>().expect("rank 3");
        let (_, c, t) = g.dim();
        let mut out = Array3::<T>::zeros((self.0.num_fine(), c, t));
        for (i, &k) in self.0.assignment().iter().enumerate() {
            let w = T::one() / T::of(self.0.cluster_sizes()[k] as f64);
            out.index_axis_mut(Axis(0), i).scaled_add(w, &g.index_axis(Axis(0), k));
        }
        vec![Some(out.into_dyn())]
    }
}

struct UnpoolOp(Arc<PoolingMap>);
impl<T: Scalar> Backward<T> for UnpoolOp {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>> {
        if !ctx.needs[0] {
            return vec![None];
        }
        let g = ctx.grad.view().into_dimensionality::<Ix3>().expect("rank 3");
        let (_, c, t) = g.dim();
        let mut out = Array3::<T>::zeros((self.0.num_coarse(), c, t));
        for (i, &k) in self.0.assignment().iter().enumerate() {
            out.index_axis_mut(Axis(0), k).scaled_add(T::one(), &g.index_axis(Axis(0), i));
        }
        vec![Some(out.into_dyn())]
    }
}

/// Elementwise ELU with unit scale: `x` for `x > 0`, `e^x - 1` otherwise.
pub fn elu_scalar<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        x.exp_m1()
    }
}

/// Cluster means `P_n^T f` on a rank-3 `(nodes, channels, time)` array.
pub fn pool_array<T: Scalar>(x: &ArrayD<T>, map: &PoolingMap) -> Result<ArrayD<T>, DiffError> {
    let x3 = x
        .view()
        .into_dimensionality::<Ix3>()
        .map_err(|_| shape_err("pool", format!("expected rank 3, got {:?}", x.shape())))?;
    let (n, c, t) = x3.dim();
    if n != map.num_fine() {
        return Err(shape_err("pool", format!("{n} nodes, map expects {}", map.num_fine())));
    }
    let mut out = Array3::<T>::zeros((map.num_coarse(), c, t));
    for (i, &k) in map.assignment().iter().enumerate() {
        out.index_axis_mut(Axis(0), k).scaled_add(T::one(), &x3.index_axis(Axis(0), i));
    }
    for (k, &size) in map.cluster_sizes().iter().enumerate() {
        let inv = T::one() / T::of(size as f64);
        out.index_axis_mut(Axis(0), k).mapv_inplace(|v| v * inv);
    }
    Ok(out.into_dyn())
}

/// Cluster copies `P f` on a rank-3 array.
pub fn unpool_array<T: Scalar>(x: &ArrayD<T>, map: &PoolingMap) -> Result<ArrayD<T>, DiffError> {
    let x3 = x
        .view()
        .into_dimensionality::<Ix3>()
        .map_err(|_| shape_err("unpool", format!("expected rank 3, got {:?}", x.shape())))?;
    let (n, c, t) = x3.dim();
    if n != map.num_coarse() {
        return Err(shape_err("unpool", format!("{n} nodes, map expects {}", map.num_coarse())));
    }
    let mut out = Array3::<T>::zeros((map.num_fine(), c, t));
    for (i, &k) in map.assignment().iter().enumerate() {
        out.index_axis_mut(Axis(0), i).assign(&x3.index_axis(Axis(0), k));
    }
    Ok(out.into_dyn())
}

impl<T: Scalar> Tape<T> {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        same_shape(self, "add", a, b)?;
        let v = self.value(a) + self.value(b);
        Ok(self.record(v, vec![a, b], AddOp))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        same_shape(self, "sub", a, b)?;
        let v = self.value(a) - self.value(b);
        Ok(self.record(v, vec![a, b], SubOp))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        same_shape(self, "mul", a, b)?;
        let v = self.value(a) * self.value(b);
        Ok(self.record(v, vec![a, b], MulOp))
    }

    pub fn scale(&mut self, a: Var, k: T) -> Var {
        let v = self.value(a).mapv(|x| x * k);
        self.record(v, vec![a], ScaleOp(k))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.record(ArrayD::from_elem(IxDyn(&[]), s), vec![a], SumOp)
    }

    /// Scalar `<a, r>` against a constant array of the same shape.
    pub fn project(&mut self, a: Var, r: &ArrayD<T>) -> Result<Var, DiffError> {
        if self.shape(a) != r.shape() {
            return Err(shape_err("project", format!("{:?} vs {:?}", self.shape(a), r.shape())));
        }
        let s = Zip::from(self.value(a))
            .and(r)
            .fold(T::zero(), |acc, &x, &y| acc + x * y);
        Ok(self.record(ArrayD::from_elem(IxDyn(&[]), s), vec![a], ProjectOp(r.clone())))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(elu_scalar);
        self.record(v, vec![a], EluOp)
    }

    /// Mean over all elements of `(a - target)^2`.
    pub fn mse_loss(&mut self, a: Var, target: &ArrayD<T>) -> Result<Var, DiffError> {
        if self.shape(a) != target.shape() {
            return Err(shape_err("mse_loss", format!("{:?} vs {:?}", self.shape(a), target.shape())));
        }
        let n = T::of(target.len() as f64);
        let s = Zip::from(self.value(a))
            .and(target)
            .fold(T::zero(), |acc, &x, &y| acc + (x - y) * (x - y));
        Ok(self.record(ArrayD::from_elem(IxDyn(&[]), s / n), vec![a], MseOp(target.clone())))
    }

    /// Pools `(fine, channels, time)` to `(coarse, channels, time)` by cluster means.
    pub fn pool(&mut self, x: Var, map: &Arc<PoolingMap>) -> Result<Var, DiffError> {
        let v = pool_array(self.value(x), map)?;
        Ok(self.record(v, vec![x], PoolOp(Arc::clone(map))))
    }

    /// Copies each coarse node's features to the fine nodes of its cluster.
    pub fn unpool(&mut self, x: Var, map: &Arc<PoolingMap>) -> Result<Var, DiffError> {
        let v = unpool_array(self.value(x), map)?;
        Ok(self.record(v, vec![x], UnpoolOp(Arc::clone(map))))
    }
}
