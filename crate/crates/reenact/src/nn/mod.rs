//! Network building blocks over the autodiff graph.
//!
//! Layers own their parameter arrays. A forward pass binds parameters into
//! the current [`Graph`] through a [`ParamTape`]; after `backward`, the tape
//! maps each owned array back to its accumulated gradient so the optimizer
//! can step. Binding the same array twice in one graph (e.g. a transformer
//! applied twice for the cycle loss) reuses one node, so gradients from both
//! uses accumulate correctly.

pub mod adam;
pub mod blocks;
pub mod losses;

use crate::autodiff::{Graph, NodeId};
use ndarray::{ArrayD, IxDyn};
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Named views of a module's parameters, in a stable order.
pub trait Module {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)>;
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }
}

/// Records which graph node each bound parameter array landed on.
pub struct ParamTape {
    frozen: bool,
    entries: Vec<(usize, NodeId)>, // (array data pointer, node)
}

impl ParamTape {
    /// Parameters bound through this tape are trainable graph variables.
    pub fn trainable() -> Self {
        Self { frozen: false, entries: Vec::new() }
    }

    /// Parameters bound through this tape are constants: gradients still flow
    /// *through* the layer to its inputs, but not into the weights.
    pub fn frozen() -> Self {
        Self { frozen: true, entries: Vec::new() }
    }

    pub fn bind(&mut self, g: &mut Graph, arr: &ArrayD<f64>) -> NodeId {
        let key = arr.as_ptr() as usize;
        if let Some(&(_, id)) = self.entries.iter().find(|(k, _)| *k == key) {
            return id;
        }
        let id = if self.frozen {
            g.constant(arr.clone())
        } else {
            g.variable(arr.clone())
        };
        self.entries.push((key, id));
        id
    }

    /// Gradients for `params` in order; zeros for params never bound.
    pub fn grads(&self, g: &Graph, params: &[(String, &ArrayD<f64>)]) -> Vec<ArrayD<f64>> {
        params
            .iter()
            .map(|(_, p)| {
                let key = p.as_ptr() as usize;
                match self.entries.iter().find(|(k, _)| *k == key) {
                    Some(&(_, id)) => g.grad_or_zeros(id),
                    None => ArrayD::zeros(p.raw_dim()),
                }
            })
            .collect()
    }
}

/// Stable seed derivation for per-component RNG streams.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64 ^ base;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn seeded_rng(base: u64, tag: &str) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(derive_seed(base, tag))
}

fn randn(shape: &[usize], std: f64, rng: &mut ChaCha20Rng) -> ArrayD<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * std)
        .collect();
    ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
}

/// 2-D convolution layer, square kernel, He-normal init.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub w: ArrayD<f64>,
    pub b: ArrayD<f64>,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn new(
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        let std = (2.0 / (cin * k * k) as f64).sqrt();
        Self {
            w: randn(&[cout, cin, k, k], std, rng),
            b: ArrayD::zeros(IxDyn(&[cout])),
            stride,
            pad,
        }
    }

    /// Zero-initialized variant for output heads that must start as identity.
    pub fn new_zeroed(cin: usize, cout: usize, k: usize, stride: usize, pad: usize) -> Self {
        Self {
            w: ArrayD::zeros(IxDyn(&[cout, cin, k, k])),
            b: ArrayD::zeros(IxDyn(&[cout])),
            stride,
            pad,
        }
    }

    pub fn fwd(&self, g: &mut Graph, tp: &mut ParamTape, x: NodeId) -> NodeId {
        let w = tp.bind(g, &self.w);
        let b = tp.bind(g, &self.b);
        g.conv2d(x, w, b, self.stride, self.pad)
    }
}

impl Module for Conv2d {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)> {
        vec![("w".into(), &self.w), ("b".into(), &self.b)]
    }
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)> {
        vec![("w".into(), &mut self.w), ("b".into(), &mut self.b)]
    }
}

/// Fully connected layer.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ArrayD<f64>,
    pub b: ArrayD<f64>,
}

impl Linear {
    pub fn new(fin: usize, fout: usize, rng: &mut ChaCha20Rng) -> Self {
        let std = (2.0 / fin as f64).sqrt();
        Self {
            w: randn(&[fout, fin], std, rng),
            b: ArrayD::zeros(IxDyn(&[fout])),
        }
    }

    pub fn fwd(&self, g: &mut Graph, tp: &mut ParamTape, x: NodeId) -> NodeId {
        let w = tp.bind(g, &self.w);
        let b = tp.bind(g, &self.b);
        g.linear(x, w, b)
    }
}

impl Module for Linear {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)> {
        vec![("w".into(), &self.w), ("b".into(), &self.b)]
    }
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)> {
        vec![("w".into(), &mut self.w), ("b".into(), &mut self.b)]
    }
}

/// Epsilon floor applied to per-channel standard deviations before dividing.
pub const NORM_EPS: f64 = 1e-5;

/// Standardize (N,C,H,W) per channel over spatial dims:
/// (x - mean) / max(std, NORM_EPS).
pub fn standardize(g: &mut Graph, x: NodeId) -> NodeId {
    let mu = g.mean_axes(x, &[2, 3]);
    let xc = g.sub(x, mu);
    let sq = g.square(xc);
    let var = g.mean_axes(sq, &[2, 3]);
    let sd = g.sqrt(var);
    let sd = g.max_scalar(sd, NORM_EPS);
    g.div(xc, sd)
}

/// Instance normalization with learned per-channel affine.
#[derive(Debug, Clone)]
pub struct InstanceNorm {
    pub gamma: ArrayD<f64>,
    pub beta: ArrayD<f64>,
}

impl InstanceNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: ArrayD::from_elem(IxDyn(&[channels]), 1.0),
            beta: ArrayD::zeros(IxDyn(&[channels])),
        }
    }

    pub fn fwd(&self, g: &mut Graph, tp: &mut ParamTape, x: NodeId) -> NodeId {
        let c = self.gamma.len();
        let xn = standardize(g, x);
        let ga = tp.bind(g, &self.gamma);
        let be = tp.bind(g, &self.beta);
        let ga = g.reshape(ga, &[1, c, 1, 1]);
        let be = g.reshape(be, &[1, c, 1, 1]);
        let scaled = g.mul(xn, ga);
        g.add(scaled, be)
    }
}

impl Module for InstanceNorm {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)> {
        vec![("gamma".into(), &self.gamma), ("beta".into(), &self.beta)]
    }
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)> {
        vec![("gamma".into(), &mut self.gamma), ("beta".into(), &mut self.beta)]
    }
}

/// Prefix child parameter names when flattening into a parent module.
pub fn nest<'a>(
    prefix: &str,
    params: Vec<(String, &'a ArrayD<f64>)>,
) -> Vec<(String, &'a ArrayD<f64>)> {
    params
        .into_iter()
        .map(|(n, p)| (format!("{prefix}.{n}"), p))
        .collect()
}

pub fn nest_mut<'a>(
    prefix: &str,
    params: Vec<(String, &'a mut ArrayD<f64>)>,
) -> Vec<(String, &'a mut ArrayD<f64>)> {
    params
        .into_iter()
        .map(|(n, p)| (format!("{prefix}.{n}"), p))
        .collect()
}
