//! Tape-based reverse-mode differentiation over dense `ndarray` tensors.
//!
//! Every operation evaluates eagerly and records a backward rule on the
//! [`Tape`]. [`Tape::backward`] walks the tape in reverse creation order, so
//! gradient accumulation order, and therefore the result bit pattern, is
//! fixed for a given sequence of operations.

mod conv;
pub mod gradcheck;
pub mod io;
mod ops;

use ndarray::ArrayD;
use thiserror::Error;

use crate::Scalar;

pub use conv::{conv_output_len, conv_transpose_output_len};
pub use ops::{elu_scalar, pool_array, unpool_array};

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("{op}: shape mismatch ({detail})")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("backward called on a non-scalar tensor of shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
}

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> DiffError {
    DiffError::ShapeMismatch {
        op,
        detail: detail.into(),
    }
}

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Inputs handed to a backward rule.
pub(crate) struct BackwardCtx<'a, T> {
    pub grad: &'a ArrayD<T>,
    pub inputs: Vec<&'a ArrayD<T>>,
    pub output: &'a ArrayD<T>,
    /// Whether each input needs a gradient; rules may skip the others.
    pub needs: Vec<bool>,
}

pub(crate) trait Backward<T: Scalar> {
    fn backward(&self, ctx: &BackwardCtx<'_, T>) -> Vec<Option<ArrayD<T>>>;
}

struct Node<T: Scalar> {
    value: ArrayD<T>,
    parents: Vec<Var>,
    op: Option<Box<dyn Backward<T>>>,
    requires_grad: bool,
}

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    /// Differentiable leaf (parameter or input under test).
    pub fn leaf(&mut self, value: ArrayD<T>) -> Var {
        self.push(value, Vec::new(), None, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: ArrayD<T>) -> Var {
        self.push(value, Vec::new(), None, false)
    }

    pub fn value(&self, v: Var) -> &ArrayD<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn record(
        &mut self,
        value: ArrayD<T>,
        parents: Vec<Var>,
        op: impl Backward<T> + 'static,
    ) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        let op: Option<Box<dyn Backward<T>>> = if requires_grad { Some(Box::new(op)) } else { None };
        self.push(value, parents, op, requires_grad)
    }

    fn push(
        &mut self,
        value: ArrayD<T>,
        parents: Vec<Var>,
        op: Option<Box<dyn Backward<T>>>,
        requires_grad: bool,
    ) -> Var {
        self.nodes.push(Node {
            value,
            parents,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Propagates `d loss / d v` to every differentiable leaf.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, DiffError> {
        let shape = self.shape(loss);
        if self.value(loss).len() != 1 {
            return Err(DiffError::NonScalarLoss {
                shape: shape.to_vec(),
            });
        }
        let mut grads: Vec<Option<ArrayD<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(ArrayD::from_elem(shape, T::one()));
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            let Some(op) = node.op.as_ref() else { continue };
            let Some(grad) = grads[id].take() else { continue };
            let ctx = BackwardCtx {
                grad: &grad,
                inputs: node.parents.iter().map(|p| &self.nodes[p.0].value).collect(),
                output: &node.value,
                needs: node.parents.iter().map(|p| self.nodes[p.0].requires_grad).collect(),
            };
            let parent_grads = op.backward(&ctx);
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for (p, g) in node.parents.iter().zip(parent_grads) {
                let Some(g) = g else { continue };
                if !self.nodes[p.0].requires_grad {
                    continue;
                }
                debug_assert_eq!(g.shape(), self.nodes[p.0].value.shape());
                match &mut grads[p.0] {
                    Some(acc) => *acc += &g,
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Gradients of one backward pass, indexed by [`Var`]; populated for leaves.
pub struct Gradients<T> {
    grads: Vec<Option<ArrayD<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&ArrayD<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of `shape` when `v` did not influence the loss.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> ArrayD<T> {
        self.get(v).cloned().unwrap_or_else(|| ArrayD::zeros(shape))
    }
}
