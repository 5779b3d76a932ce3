//! Forward op constructors and the backward dispatch table.

use super::kernels::*;
use super::{reduce_to_shape, Graph, Node, NodeId, Op, Unary};
use ndarray::{ArrayD, Axis, IxDyn};

fn broadcast_shape(a: &[usize], b: &[usize]) -> Vec<usize> {
    let n = a.len().max(b.len());
    let mut out = vec![0usize; n];
    for i in 0..n {
        let da = if i < n - a.len() { 1 } else { a[i - (n - a.len())] };
        let db = if i < n - b.len() { 1 } else { b[i - (n - b.len())] };
        assert!(
            da == db || da == 1 || db == 1,
            "incompatible broadcast shapes {a:?} vs {b:?}"
        );
        out[i] = da.max(db);
    }
    out
}

fn bin_forward(a: &ArrayD<f64>, b: &ArrayD<f64>, f: impl Fn(f64, f64) -> f64) -> ArrayD<f64> {
    let shape = broadcast_shape(a.shape(), b.shape());
    let av = a.broadcast(IxDyn(&shape)).expect("lhs broadcast");
    let bv = b.broadcast(IxDyn(&shape)).expect("rhs broadcast");
    let mut out = ArrayD::<f64>::zeros(IxDyn(&shape));
    ndarray::Zip::from(&mut out)
        .and(&av)
        .and(&bv)
        .for_each(|o, &x, &y| *o = f(x, y));
    out
}

impl Graph {
    fn binary(&mut self, a: NodeId, b: NodeId, op: Op, f: impl Fn(f64, f64) -> f64) -> NodeId {
        let v = bin_forward(&self.nodes[a].value, &self.nodes[b].value, f);
        let ng = self.needs(a) || self.needs(b);
        self.push_node(v, op, ng)
    }

    fn push_node(&mut self, value: ArrayD<f64>, op: Op, needs_grad: bool) -> NodeId {
        let value = if value.is_standard_layout() {
            value
        } else {
            value.as_standard_layout().to_owned()
        };
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            needs_grad,
        });
        self.nodes.len() - 1
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }
    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, Op::Div(a, b), |x, y| x / y)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = &self.nodes[a].value + c;
        let ng = self.needs(a);
        self.push_node(v, Op::AddScalar(a, c), ng)
    }
    pub fn mul_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = &self.nodes[a].value * c;
        let ng = self.needs(a);
        self.push_node(v, Op::MulScalar(a, c), ng)
    }
    pub fn max_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.nodes[a].value.mapv(|x| x.max(c));
        let ng = self.needs(a);
        self.push_node(v, Op::MaxScalar(a, c), ng)
    }
    /// Clamp to [lo, hi]. The subgradient passes on the closed interval, so a
    /// value sitting exactly on a bound still receives gradient.
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self.nodes[a].value.mapv(|x| x.clamp(lo, hi));
        let ng = self.needs(a);
        self.push_node(v, Op::Clamp(a, lo, hi), ng)
    }

    fn unary(&mut self, a: NodeId, u: Unary) -> NodeId {
        let v = self.nodes[a].value.mapv(|x| unary_forward(u, x));
        let ng = self.needs(a);
        self.push_node(v, Op::Unary(a, u), ng)
    }
    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Unary::Relu)
    }
    /// Leaky ReLU with fixed negative slope 0.2.
    pub fn leaky_relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Unary::LeakyRelu)
    }
    pub fn silu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Unary::Silu)
    }
    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Unary::Sigmoid)
    }
    pub fn tanh_(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Unary::Tanh)
    }
    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Unary::Softplus)
    }
    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Unary::Exp)
    }
    pub fn ln(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Unary::Ln)
    }
    pub fn abs(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Unary::Abs)
    }
    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Unary::Sqrt)
    }
    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Unary::Square)
    }
    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Unary::Neg)
    }

    /// Mean over `axes`, keeping them as size-1 dims.
    pub fn mean_axes(&mut self, a: NodeId, axes: &[usize]) -> NodeId {
        let mut v = self.nodes[a].value.clone();
        let mut count = 1usize;
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        for &ax in sorted.iter().rev() {
            count *= v.shape()[ax];
            v = v.sum_axis(Axis(ax)).insert_axis(Axis(ax));
        }
        v /= count as f64;
        let ng = self.needs(a);
        self.push_node(v, Op::MeanAxes(a, sorted), ng)
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let m = self.nodes[a].value.mean().unwrap();
        let ng = self.needs(a);
        self.push_node(ArrayD::from_elem(IxDyn(&[]), m), Op::MeanAll(a), ng)
    }
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s = self.nodes[a].value.sum();
        let ng = self.needs(a);
        self.push_node(ArrayD::from_elem(IxDyn(&[]), s), Op::SumAll(a), ng)
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> NodeId {
        let v = self.nodes[a]
            .value
            .clone()
            .into_shape_with_order(IxDyn(shape))
            .expect("reshape: element count mismatch");
        let ng = self.needs(a);
        self.push_node(v, Op::Reshape(a, shape.to_vec()), ng)
    }

    pub fn concat(&mut self, xs: &[NodeId], axis: usize) -> NodeId {
        let views: Vec<_> = xs.iter().map(|&id| self.nodes[id].value.view()).collect();
        let v = ndarray::concatenate(Axis(axis), &views).expect("concat: shape mismatch");
        let ng = xs.iter().any(|&id| self.needs(id));
        self.push_node(v, Op::Concat(xs.to_vec(), axis), ng)
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize, pad: usize) -> NodeId {
        let v = conv2d_forward(
            &self.nodes[x].value,
            &self.nodes[w].value,
            &self.nodes[b].value,
            stride,
            pad,
        );
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        self.push_node(v, Op::Conv2d { x, w, b, stride, pad }, ng)
    }

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let v = linear_forward(&self.nodes[x].value, &self.nodes[w].value, &self.nodes[b].value);
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        self.push_node(v, Op::Linear { x, w, b }, ng)
    }

    pub fn upsample2(&mut self, a: NodeId) -> NodeId {
        let v = upsample2_forward(&self.nodes[a].value);
        let ng = self.needs(a);
        self.push_node(v, Op::UpsampleNearest2(a), ng)
    }

    pub fn avgpool2(&mut self, a: NodeId) -> NodeId {
        let v = avgpool2_forward(&self.nodes[a].value);
        let ng = self.needs(a);
        self.push_node(v, Op::AvgPool2(a), ng)
    }

    /// (N,C,H,W) -> (N,C) spatial mean.
    pub fn global_avg_pool(&mut self, a: NodeId) -> NodeId {
        let (n, c, h, w) = dims4(&self.nodes[a].value);
        let mut out = ArrayD::<f64>::zeros(IxDyn(&[n, c]));
        for ni in 0..n {
            for ci in 0..c {
                out[[ni, ci]] = self.nodes[a]
                    .value
                    .slice(ndarray::s![ni, ci, .., ..].as_ref())
                    .mean()
                    .unwrap();
            }
        }
        let _ = (h, w);
        let ng = self.needs(a);
        self.push_node(out, Op::GlobalAvgPool(a), ng)
    }

    /// Mean cross-entropy of logit rows (N,K) against integer labels.
    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> NodeId {
        let l2 = as2(&self.nodes[logits].value);
        assert_eq!(l2.nrows(), labels.len(), "cross_entropy: label count");
        let mut total = 0.0;
        for (row, &y) in l2.rows().into_iter().zip(labels) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
            total += lse - row[y];
        }
        let v = ArrayD::from_elem(IxDyn(&[]), total / labels.len() as f64);
        let ng = self.needs(logits);
        self.push_node(v, Op::CrossEntropy(logits, labels.to_vec()), ng)
    }
}

fn unary_forward(u: Unary, x: f64) -> f64 {
    match u {
        Unary::Relu => x.max(0.0),
        Unary::LeakyRelu => {
            if x > 0.0 {
                x
            } else {
                0.2 * x
            }
        }
        Unary::Silu => x * sigmoid(x),
        Unary::Sigmoid => sigmoid(x),
        Unary::Tanh => x.tanh(),
        Unary::Softplus => {
            // ln(1 + e^x), overflow-safe
            x.max(0.0) + (-x.abs()).exp().ln_1p()
        }
        Unary::Exp => x.exp(),
        Unary::Ln => x.ln(),
        Unary::Abs => x.abs(),
        Unary::Sqrt => x.sqrt(),
        Unary::Square => x * x,
        Unary::Neg => -x,
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn unary_backward(u: Unary, x: f64, y: f64, g: f64) -> f64 {
    match u {
        Unary::Relu => {
            if x > 0.0 {
                g
            } else {
                0.0
            }
        }
        Unary::LeakyRelu => {
            if x > 0.0 {
                g
            } else {
                0.2 * g
            }
        }
        Unary::Silu => {
            let s = sigmoid(x);
            g * (s + x * s * (1.0 - s))
        }
        Unary::Sigmoid => g * y * (1.0 - y),
        Unary::Tanh => g * (1.0 - y * y),
        Unary::Softplus => g * sigmoid(x),
        Unary::Exp => g * y,
        Unary::Ln => g / x,
        Unary::Abs => g * x.signum() * if x == 0.0 { 0.0 } else { 1.0 },
        // Subgradient 0 at the origin keeps max(sqrt(v), eps) chains NaN-free.
        Unary::Sqrt => {
            if y > 0.0 {
                g / (2.0 * y)
            } else {
                0.0
            }
        }
        Unary::Square => g * 2.0 * x,
        Unary::Neg => -g,
    }
}

/// Compute the gradient contributions of node `id` to each of its parents.
pub(crate) fn backward_step(
    graph: &Graph,
    id: NodeId,
    g: &ArrayD<f64>,
) -> Vec<(NodeId, ArrayD<f64>)> {
    let nodes = &graph.nodes;
    let val = |i: NodeId| &nodes[i].value;
    let needs = |i: NodeId| nodes[i].needs_grad;
    let mut out: Vec<(NodeId, ArrayD<f64>)> = Vec::new();
    match &nodes[id].op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            if needs(*a) {
                out.push((*a, reduce_to_shape(g, val(*a).shape())));
            }
            if needs(*b) {
                out.push((*b, reduce_to_shape(g, val(*b).shape())));
            }
        }
        Op::Sub(a, b) => {
            if needs(*a) {
                out.push((*a, reduce_to_shape(g, val(*a).shape())));
            }
            if needs(*b) {
                out.push((*b, reduce_to_shape(&(-g), val(*b).shape())));
            }
        }
        Op::Mul(a, b) => {
            if needs(*a) {
                let da = bin_forward(g, val(*b), |gg, bb| gg * bb);
                out.push((*a, reduce_to_shape(&da, val(*a).shape())));
            }
            if needs(*b) {
                let db = bin_forward(g, val(*a), |gg, aa| gg * aa);
                out.push((*b, reduce_to_shape(&db, val(*b).shape())));
            }
        }
        Op::Div(a, b) => {
            if needs(*a) {
                let da = bin_forward(g, val(*b), |gg, bb| gg / bb);
                out.push((*a, reduce_to_shape(&da, val(*a).shape())));
            }
            if needs(*b) {
                let num = bin_forward(g, val(*a), |gg, aa| gg * aa);
                let db = bin_forward(&num, val(*b), |nn, bb| -nn / (bb * bb));
                out.push((*b, reduce_to_shape(&db, val(*b).shape())));
            }
        }
        Op::AddScalar(a, _) => {
            if needs(*a) {
                out.push((*a, g.clone()));
            }
        }
        Op::MulScalar(a, c) => {
            if needs(*a) {
                out.push((*a, g * *c));
            }
        }
        Op::MaxScalar(a, c) => {
            if needs(*a) {
                let mut d = g.clone();
                ndarray::Zip::from(&mut d).and(val(*a)).for_each(|dd, &x| {
                    if x <= *c {
                        *dd = 0.0;
                    }
                });
                out.push((*a, d));
            }
        }
        Op::Clamp(a, lo, hi) => {
            if needs(*a) {
                let mut d = g.clone();
                ndarray::Zip::from(&mut d).and(val(*a)).for_each(|dd, &x| {
                    if x < *lo || x > *hi {
                        *dd = 0.0;
                    }
                });
                out.push((*a, d));
            }
        }
        Op::Unary(a, u) => {
            if needs(*a) {
                let mut d = ArrayD::<f64>::zeros(g.raw_dim());
                ndarray::Zip::from(&mut d)
                    .and(val(*a))
                    .and(&nodes[id].value)
                    .and(g)
                    .for_each(|dd, &x, &y, &gg| *dd = unary_backward(*u, x, y, gg));
                out.push((*a, d));
            }
        }
        Op::MeanAxes(a, axes) => {
            if needs(*a) {
                let shape = val(*a).shape();
                let count: usize = axes.iter().map(|&ax| shape[ax]).product();
                let bc = g.broadcast(IxDyn(shape)).unwrap().to_owned();
                out.push((*a, bc / count as f64));
            }
        }
        Op::MeanAll(a) => {
            if needs(*a) {
                let n = val(*a).len() as f64;
                let gs = g.iter().next().copied().unwrap();
                out.push((*a, ArrayD::from_elem(val(*a).raw_dim(), gs / n)));
            }
        }
        Op::SumAll(a) => {
            if needs(*a) {
                let gs = g.iter().next().copied().unwrap();
                out.push((*a, ArrayD::from_elem(val(*a).raw_dim(), gs)));
            }
        }
        Op::Reshape(a, _) => {
            if needs(*a) {
                out.push((
                    *a,
                    g.clone()
                        .into_shape_with_order(val(*a).raw_dim())
                        .unwrap(),
                ));
            }
        }
        Op::Concat(xs, axis) => {
            let mut off = 0usize;
            for &x in xs {
                let len = val(x).shape()[*axis];
                if needs(x) {
                    let sl = g
                        .slice_axis(Axis(*axis), ndarray::Slice::from(off..off + len))
                        .to_owned();
                    out.push((x, sl));
                }
                off += len;
            }
        }
        Op::Conv2d { x, w, b, stride, pad } => {
            let (dx, dw, db) = conv2d_backward(
                val(*x),
                val(*w),
                g,
                *stride,
                *pad,
                needs(*x),
                needs(*w) || needs(*b),
            );
            if let (true, Some(dx)) = (needs(*x), dx) {
                out.push((*x, dx));
            }
            if let (true, Some(dw)) = (needs(*w), dw) {
                out.push((*w, dw));
            }
            if let (true, Some(db)) = (needs(*b), db) {
                out.push((*b, db));
            }
        }
        Op::Linear { x, w, b } => {
            let g2 = as2(g);
            if needs(*x) {
                out.push((*x, g2.dot(&as2(val(*w))).into_dyn()));
            }
            if needs(*w) {
                out.push((*w, g2.t().dot(&as2(val(*x))).into_dyn()));
            }
            if needs(*b) {
                out.push((*b, g2.sum_axis(Axis(0)).into_dyn()));
            }
        }
        Op::UpsampleNearest2(a) => {
            if needs(*a) {
                out.push((*a, upsample2_backward(g)));
            }
        }
        Op::AvgPool2(a) => {
            if needs(*a) {
                out.push((*a, avgpool2_backward(g)));
            }
        }
        Op::GlobalAvgPool(a) => {
            if needs(*a) {
                let (n, c, h, w) = dims4(val(*a));
                let mut d = ArrayD::<f64>::zeros(val(*a).raw_dim());
                let scale = 1.0 / (h * w) as f64;
                for ni in 0..n {
                    for ci in 0..c {
                        let gv = g[[ni, ci]] * scale;
                        d.slice_mut(ndarray::s![ni, ci, .., ..].as_ref()).fill(gv);
                    }
                }
                out.push((*a, d));
            }
        }
        Op::CrossEntropy(logits, labels) => {
            if needs(*logits) {
                let l2 = as2(val(*logits));
                let n = labels.len();
                let gs = g.iter().next().copied().unwrap();
                let mut d = ndarray::Array2::<f64>::zeros((l2.nrows(), l2.ncols()));
                for (i, (row, &y)) in l2.rows().into_iter().zip(labels).enumerate() {
                    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = row.iter().map(|&v| (v - m).exp()).collect();
                    let z: f64 = exps.iter().sum();
                    for (j, e) in exps.iter().enumerate() {
                        let p = e / z;
                        d[[i, j]] = gs * (p - if j == y { 1.0 } else { 0.0 }) / n as f64;
                    }
                }
                out.push((*logits, d.into_dyn()));
            }
        }
    }
    out
}
