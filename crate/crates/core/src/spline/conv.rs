use std::sync::Arc;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Array3, ArrayD, ArrayView3, Axis, Ix3};

use super::{BasisError, SplineShape};
use crate::diff::{shape_err, Backward, BackwardCtx, DiffError, Tape, Var};
use crate::mesh::{BipartiteGraph, GeometryGraph};
use crate::Scalar;

/// Directed edges `(target, source)` with their precomputed basis products.
///
/// The same structure drives the spatial convolution on one graph (sources
/// and targets are the same vertex set) and the bipartite torso-to-heart map.
#[derive(Debug, Clone)]
pub struct EdgeBasis<T> {
    pub num_targets: usize,
    pub num_sources: usize,
    pub shape: SplineShape,
    pub edges: Vec<(usize, usize)>,
    support: usize,
    index: Vec<usize>,
    weight: Vec<T>,
}

impl<T: Scalar> EdgeBasis<T> {
    pub fn new(
        num_targets: usize,
        num_sources: usize,
        edges: &[(usize, usize)],
        attrs: &[[f64; 3]],
        shape: SplineShape,
    ) -> Result<Self, BasisError> {
        shape.validate()?;
        let support = shape.support();
        let mut index = Vec::with_capacity(edges.len() * support);
        let mut weight = Vec::with_capacity(edges.len() * support);
        for u in attrs {
            for (p, b) in shape.basis_products(*u)? {
                index.push(p);
                weight.push(T::of(b));
            }
        }
        Ok(Self {
            num_targets,
            num_sources,
            shape,
            edges: edges.to_vec(),
            support,
            index,
            weight,
        })
    }

    pub fn for_graph(graph: &GeometryGraph, shape: SplineShape) -> Result<Self, BasisError> {
        Self::new(graph.num_vertices, graph.num_vertices, &graph.edges, &graph.edge_attrs, shape)
    }

    /// Targets are heart latent vertices, sources torso latent vertices.
    pub fn for_bipartite(graph: &BipartiteGraph, shape: SplineShape) -> Result<Self, BasisError> {
        Self::new(graph.num_right, graph.num_left, &graph.edges, &graph.edge_attrs, shape)
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    fn products(&self, e: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = e * self.support..(e + 1) * self.support;
        self.index[r.clone()].iter().copied().zip(self.weight[r].iter().copied())
    }

    /// `g(u_e) = sum_p b_p W_p`, `in x out`.
    fn edge_kernel(&self, e: usize, w: ArrayView3<'_, T>, g: &mut Array2<T>) {
        g.fill(T::zero());
        for (p, b) in self.products(e) {
            if b != T::zero() {
                g.scaled_add(b, &w.index_axis(Axis(0), p));
            }
        }
    }
}

struct SplineConvOp<T>(Arc<EdgeBasis<T>>);

impl<T: Scalar> Backward<T> for SplineConvOp<T> {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>> {
        let basis = &self.0;
        let x = ctx.inputs[0].view().into_dimensionality::<Ix3>().unwrap();
        let w = ctx.inputs[1].view().into_dimensionality::<Ix3>().unwrap();
        let dy = ctx.grad.view().into_dimensionality::<Ix3>().unwrap();
        let (_, ci, co) = w.dim();
        let mut dx = ctx.needs[0].then(|| Array3::<T>::zeros(x.dim()));
        let mut dw = ctx.needs[1].then(|| Array3::<T>::zeros(w.dim()));
        let mut g = Array2::<T>::zeros((ci, co));
        let mut outer = Array2::<T>::zeros((ci, co));
        for (e, &(tgt, src)) in basis.edges.iter().enumerate() {
            let dy_t = dy.index_axis(Axis(0), tgt);
            let x_s = x.index_axis(Axis(0), src);
            if let Some(dx) = dx.as_mut() {
                basis.edge_kernel(e, w, &mut g);
                let mut dx_s = dx.index_axis_mut(Axis(0), src);
                general_mat_mul(T::one(), &g, &dy_t, T::one(), &mut dx_s);
            }
            if let Some(dw) = dw.as_mut() {
                general_mat_mul(T::one(), &x_s, &dy_t.t(), T::zero(), &mut outer);
                for (p, b) in basis.products(e) {
                    if b != T::zero() {
                        dw.index_axis_mut(Axis(0), p).scaled_add(b, &outer);
                    }
                }
            }
        }
        vec![dx.map(|a| a.into_dyn()), dw.map(|a| a.into_dyn())]
    }
}

impl<T: Scalar> Tape<T> {
    /// `out(i) = sum_{(i, j)} g(u(i, j))^T f(j)`, independently per time frame.
    ///
    /// `x`: `(num_sources, in, time)`, `w`: `(num_bases, in, out)`; output
    /// `(num_targets, out, time)`.
    pub fn spline_conv(&mut self, basis: &Arc<EdgeBasis<T>>, x: Var, w: Var) -> Result<Var, DiffError> {
        let xv = self
            .value(x)
            .view()
            .into_dimensionality::<Ix3>()
            .map_err(|_| shape_err("spline_conv", format!("features must be rank 3, got {:?}", self.shape(x))))?;
        let wv = self
            .value(w)
            .view()
            .into_dimensionality::<Ix3>()
            .map_err(|_| shape_err("spline_conv", format!("weights must be rank 3, got {:?}", self.shape(w))))?;
        let (n, ci, time) = xv.dim();
        let (k, wci, co) = wv.dim();
        if n != basis.num_sources {
            return Err(shape_err("spline_conv", format!("{n} feature nodes, graph has {} sources", basis.num_sources)));
        }
        if k != basis.shape.num_bases() || wci != ci {
            return Err(shape_err(
                "spline_conv",
                format!("weights {:?} incompatible with {} bases and {ci} input channels", wv.dim(), basis.shape.num_bases()),
            ));
        }
        let mut out = Array3::<T>::zeros((basis.num_targets, co, time));
        let mut g = Array2::<T>::zeros((ci, co));
        for (e, &(tgt, src)) in basis.edges.iter().enumerate() {
            basis.edge_kernel(e, wv, &mut g);
            let mut o = out.index_axis_mut(Axis(0), tgt);
            general_mat_mul(T::one(), &g.t(), &xv.index_axis(Axis(0), src), T::one(), &mut o);
        }
        Ok(self.record(out.into_dyn(), vec![x, w], SplineConvOp(Arc::clone(basis))))
    }

    /// Bipartite map `z_h(i) = sum_j h(u(i, j))^T z_b(j)` from torso latent
    /// features to heart latent features; the kernel is a spline kernel.
    pub fn bipartite_spline_conv(&mut self, basis: &Arc<EdgeBasis<T>>, z_b: Var, w: Var) -> Result<Var, DiffError> {
        self.spline_conv(basis, z_b, w)
    }
}
