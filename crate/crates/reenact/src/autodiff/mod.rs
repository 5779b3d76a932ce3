//! Reverse-mode automatic differentiation on dynamic-rank f64 arrays.
//!
//! A [`Graph`] is a define-by-run tape: every operation evaluates eagerly and
//! records enough structure to replay the chain rule backwards. Values are
//! `ArrayD<f64>`; scalars are rank-0 arrays. All operations are deterministic,
//! so a fixed parameter state and input always reproduce the same forward
//! values and gradients bit for bit.
//!
//! Gradients only propagate into nodes created with [`Graph::variable`] (and
//! everything downstream of them). Constants created with [`Graph::constant`]
//! block gradient flow into themselves but not through sibling inputs, which
//! is how frozen networks participate in a loss without receiving updates.

mod kernels;
mod ops;

pub mod gradcheck;

pub use kernels::conv2d_forward;

use ndarray::{ArrayD, IxDyn};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Relu,
    LeakyRelu,
    Silu,
    Sigmoid,
    Tanh,
    Softplus,
    Exp,
    Ln,
    Abs,
    Sqrt,
    Square,
    Neg,
}

#[derive(Debug, Clone)]
#[allow(dead_code)] // scalar payloads are kept for tape debugging
pub(crate) enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    AddScalar(NodeId, f64),
    MulScalar(NodeId, f64),
    /// Elementwise max(x, c); subgradient passes where x > c.
    MaxScalar(NodeId, f64),
    /// Elementwise clamp to [lo, hi]; subgradient passes strictly inside.
    Clamp(NodeId, f64, f64),
    Unary(NodeId, Unary),
    /// Mean over the given axes, keeping them as size-1 dims.
    MeanAxes(NodeId, Vec<usize>),
    MeanAll(NodeId),
    SumAll(NodeId),
    Reshape(NodeId, Vec<usize>),
    Concat(Vec<NodeId>, usize),
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    },
    Linear {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    UpsampleNearest2(NodeId),
    AvgPool2(NodeId),
    GlobalAvgPool(NodeId),
    /// Mean cross-entropy of rows of logits against integer labels.
    CrossEntropy(NodeId, Vec<usize>),
}

pub(crate) struct Node {
    pub value: ArrayD<f64>,
    pub grad: Option<ArrayD<f64>>,
    pub op: Op,
    pub needs_grad: bool,
}

/// Define-by-run tape. Build one per forward/backward pass.
#[derive(Default)]
pub struct Graph {
    pub(crate) nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: ArrayD<f64>, op: Op, needs_grad: bool) -> NodeId {
        debug_assert!(value.is_standard_layout() || value.ndim() == 0);
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            needs_grad,
        });
        self.nodes.len() - 1
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id].needs_grad
    }

    /// Leaf that accumulates a gradient (trainable parameters, grad-check inputs).
    pub fn variable(&mut self, value: ArrayD<f64>) -> NodeId {
        let v = to_standard(value);
        self.push(v, Op::Leaf, true)
    }

    /// Leaf that blocks gradient flow into itself (inputs, frozen weights).
    pub fn constant(&mut self, value: ArrayD<f64>) -> NodeId {
        let v = to_standard(value);
        self.push(v, Op::Leaf, false)
    }

    pub fn scalar_const(&mut self, v: f64) -> NodeId {
        self.constant(ArrayD::from_elem(IxDyn(&[]), v))
    }

    pub fn value(&self, id: NodeId) -> &ArrayD<f64> {
        &self.nodes[id].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id].value.shape()
    }

    /// Value of a rank-0 or single-element node as f64.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = &self.nodes[id].value;
        assert_eq!(v.len(), 1, "node {id} is not a scalar");
        *v.iter().next().unwrap()
    }

    pub fn grad(&self, id: NodeId) -> Option<&ArrayD<f64>> {
        self.nodes[id].grad.as_ref()
    }

    /// Gradient of a node, or zeros in its shape if nothing flowed into it.
    pub fn grad_or_zeros(&self, id: NodeId) -> ArrayD<f64> {
        match &self.nodes[id].grad {
            Some(g) => g.clone(),
            None => ArrayD::zeros(self.nodes[id].value.raw_dim()),
        }
    }

    /// Run the chain rule from `loss` (must be a single-element node) back to
    /// every variable that participated in its computation.
    pub fn backward(&mut self, loss: NodeId) {
        assert_eq!(
            self.nodes[loss].value.len(),
            1,
            "backward root must be scalar"
        );
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.nodes[loss].grad = Some(ArrayD::from_elem(self.nodes[loss].value.raw_dim(), 1.0));
        for id in (0..=loss).rev() {
            if self.nodes[id].grad.is_none() || matches!(self.nodes[id].op, Op::Leaf) {
                continue;
            }
            let grad_out = self.nodes[id].grad.take().unwrap();
            let contribs = ops::backward_step(self, id, &grad_out);
            self.nodes[id].grad = Some(grad_out);
            for (pid, g) in contribs {
                match &mut self.nodes[pid].grad {
                    Some(acc) => *acc += &g,
                    slot @ None => *slot = Some(g),
                }
            }
        }
    }
}

fn to_standard(value: ArrayD<f64>) -> ArrayD<f64> {
    if value.is_standard_layout() {
        value
    } else {
        value.as_standard_layout().to_owned()
    }
}

/// Sum a gradient down to `shape`, undoing broadcast expansion.
pub(crate) fn reduce_to_shape(grad: &ArrayD<f64>, shape: &[usize]) -> ArrayD<f64> {
    if grad.shape() == shape {
        return grad.clone();
    }
    let mut g = grad.clone();
    // Collapse leading axes the target does not have.
    while g.ndim() > shape.len() {
        g = g.sum_axis(ndarray::Axis(0));
    }
    // Sum axes where the target is 1 but the gradient is wider.
    for ax in 0..shape.len() {
        if shape[ax] == 1 && g.shape()[ax] != 1 {
            let summed = g.sum_axis(ndarray::Axis(ax));
            g = summed.insert_axis(ndarray::Axis(ax));
        }
    }
    assert_eq!(g.shape(), shape, "gradient not reducible to target shape");
    g
}
