//! Reusable network blocks with explicit shape contracts: strided
//! encoder stacks, upsampling decoders, patch discriminators, and adaptive
//! instance normalization with its residual block.

use super::{nest, nest_mut, standardize, Conv2d, InstanceNorm, Module, ParamTape};
use crate::autodiff::{Graph, NodeId};
use crate::error::{Error, Result};
use ndarray::{Array1, ArrayD, IxDyn};
use rand_chacha::ChaCha20Rng;

/// Declared shape of one tensor stage (batch implied).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorSpec {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NormKind {
    Instance,
    None,
}

/// Activation used between block stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Act {
    /// Smooth activation for generators.
    Silu,
    /// Slope-0.2 leaky ReLU for discriminators.
    LeakyRelu,
}

impl Act {
    fn apply(self, g: &mut Graph, x: NodeId) -> NodeId {
        match self {
            Act::Silu => g.silu(x),
            Act::LeakyRelu => g.leaky_relu(x),
        }
    }
}

/// Width/depth configuration shared by encoder, decoder and discriminators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BlockConfig {
    /// Downsample stage count; each stage halves spatial dims.
    pub stages: usize,
    /// Channels after the first stage; doubles per stage up to `max_width`.
    pub base_width: usize,
    /// Channel cap (power of two).
    pub max_width: usize,
    /// AdaIN residual blocks in the generator bottleneck.
    pub res_blocks: usize,
    pub norm: NormKind,
}

impl BlockConfig {
    pub fn validate(&self, resolution: usize) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::Config("stage count must be >= 1".into()));
        }
        if !self.base_width.is_power_of_two() || !self.max_width.is_power_of_two() {
            return Err(Error::Config(format!(
                "widths must be powers of two: base {} max {}",
                self.base_width, self.max_width
            )));
        }
        if resolution >> self.stages == 0 {
            return Err(Error::Config(format!(
                "{} stages collapse resolution {} below 1",
                self.stages, resolution
            )));
        }
        Ok(())
    }

    pub fn width(&self, stage: usize) -> usize {
        (self.base_width << stage).min(self.max_width)
    }

    /// Channels of the deepest feature map.
    pub fn bottleneck_width(&self) -> usize {
        self.width(self.stages - 1)
    }

    /// Desk-scale default: 4 stages from width 32, 4 residual blocks.
    pub fn default_generator() -> Self {
        Self {
            stages: 4,
            base_width: 32,
            max_width: 256,
            res_blocks: 4,
            norm: NormKind::Instance,
        }
    }

    /// 3-stage patch discriminator default.
    pub fn default_discriminator() -> Self {
        Self {
            stages: 3,
            base_width: 32,
            max_width: 256,
            res_blocks: 0,
            norm: NormKind::None,
        }
    }
}

struct Stage {
    conv: Conv2d,
    norm: Option<InstanceNorm>,
}

/// Strided convolutional encoder: halves spatial dims per stage and doubles
/// channels up to the configured cap.
pub struct Encoder {
    stages: Vec<Stage>,
    act: Act,
    pub cfg: BlockConfig,
}

impl Encoder {
    pub fn build(
        cfg: BlockConfig,
        in_channels: usize,
        resolution: usize,
        act: Act,
        rng: &mut ChaCha20Rng,
    ) -> Result<Self> {
        cfg.validate(resolution)?;
        let mut stages = Vec::new();
        let mut cin = in_channels;
        for s in 0..cfg.stages {
            let cout = cfg.width(s);
            let norm = match cfg.norm {
                // First stage sees raw pixels; normalizing there erases DC.
                NormKind::Instance if s > 0 => Some(InstanceNorm::new(cout)),
                _ => None,
            };
            stages.push(Stage {
                conv: Conv2d::new(cin, cout, 3, 2, 1, rng),
                norm,
            });
            cin = cout;
        }
        Ok(Self { stages, act, cfg })
    }

    pub fn fwd(&self, g: &mut Graph, tp: &mut ParamTape, x: NodeId) -> NodeId {
        let mut h = x;
        for st in &self.stages {
            h = st.conv.fwd(g, tp, h);
            if let Some(n) = &st.norm {
                h = n.fwd(g, tp, h);
            }
            h = self.act.apply(g, h);
        }
        h
    }

    pub fn out_channels(&self) -> usize {
        self.cfg.bottleneck_width()
    }
}

impl Module for Encoder {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)> {
        let mut out = Vec::new();
        for (i, st) in self.stages.iter().enumerate() {
            out.extend(nest(&format!("s{i}.conv"), st.conv.params()));
            if let Some(n) = &st.norm {
                out.extend(nest(&format!("s{i}.norm"), n.params()));
            }
        }
        out
    }
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)> {
        let mut out = Vec::new();
        for (i, st) in self.stages.iter_mut().enumerate() {
            out.extend(nest_mut(&format!("s{i}.conv"), st.conv.params_mut()));
            if let Some(n) = &mut st.norm {
                out.extend(nest_mut(&format!("s{i}.norm"), n.params_mut()));
            }
        }
        out
    }
}

/// Output head of a decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Linear output, zero-initialized: the stack starts as the zero map.
    ZeroLinear,
    /// Sigmoid-bounded output in (0,1).
    Sigmoid,
}

/// Upsampling decoder mirroring [`Encoder`]: nearest-neighbor x2 followed by
/// a 3x3 convolution per stage, then a head convolution.
pub struct Decoder {
    stages: Vec<Stage>,
    head: Conv2d,
    head_kind: Head,
    act: Act,
}

impl Decoder {
    pub fn build(
        cfg: BlockConfig,
        in_channels: usize,
        out_channels: usize,
        head_kind: Head,
        act: Act,
        rng: &mut ChaCha20Rng,
    ) -> Result<Self> {
        cfg.validate(1 << cfg.stages)?;
        let mut stages = Vec::new();
        let mut cin = in_channels;
        for s in (0..cfg.stages).rev() {
            // Mirror the encoder widths on the way up; the last stage keeps
            // base width before the head.
            let cout = if s == 0 { cfg.base_width } else { cfg.width(s - 1) };
            let norm = match cfg.norm {
                NormKind::Instance => Some(InstanceNorm::new(cout)),
                NormKind::None => None,
            };
            stages.push(Stage {
                conv: Conv2d::new(cin, cout, 3, 1, 1, rng),
                norm,
            });
            cin = cout;
        }
        let head = match head_kind {
            Head::ZeroLinear => Conv2d::new_zeroed(cin, out_channels, 3, 1, 1),
            Head::Sigmoid => Conv2d::new(cin, out_channels, 3, 1, 1, rng),
        };
        Ok(Self {
            stages,
            head,
            head_kind,
            act,
        })
    }

    pub fn fwd(&self, g: &mut Graph, tp: &mut ParamTape, x: NodeId) -> NodeId {
        let mut h = x;
        for st in &self.stages {
            h = g.upsample2(h);
            h = st.conv.fwd(g, tp, h);
            if let Some(n) = &st.norm {
                h = n.fwd(g, tp, h);
            }
            h = self.act.apply(g, h);
        }
        let out = self.head.fwd(g, tp, h);
        match self.head_kind {
            Head::ZeroLinear => out,
            Head::Sigmoid => g.sigmoid(out),
        }
    }
}

impl Module for Decoder {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)> {
        let mut out = Vec::new();
        for (i, st) in self.stages.iter().enumerate() {
            out.extend(nest(&format!("s{i}.conv"), st.conv.params()));
            if let Some(n) = &st.norm {
                out.extend(nest(&format!("s{i}.norm"), n.params()));
            }
        }
        out.extend(nest("head", self.head.params()));
        out
    }
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)> {
        let mut out = Vec::new();
        for (i, st) in self.stages.iter_mut().enumerate() {
            out.extend(nest_mut(&format!("s{i}.conv"), st.conv.params_mut()));
            if let Some(n) = &mut st.norm {
                out.extend(nest_mut(&format!("s{i}.norm"), n.params_mut()));
            }
        }
        out.extend(nest_mut("head", self.head.params_mut()));
        out
    }
}

/// Patch discriminator: maps an image to an SxS score map, one score per
/// receptive patch. `sigmoid` selects probability outputs (log-loss GANs);
/// without it the outputs stay linear (least-squares GANs).
pub struct PatchDiscriminator {
    stages: Vec<Stage>,
    head: Conv2d,
    sigmoid: bool,
}

impl PatchDiscriminator {
    pub fn build(
        cfg: BlockConfig,
        in_channels: usize,
        resolution: usize,
        sigmoid: bool,
        rng: &mut ChaCha20Rng,
    ) -> Result<Self> {
        cfg.validate(resolution)?;
        let mut stages = Vec::new();
        let mut cin = in_channels;
        for s in 0..cfg.stages {
            let cout = cfg.width(s);
            stages.push(Stage {
                conv: Conv2d::new(cin, cout, 3, 2, 1, rng),
                norm: None,
            });
            cin = cout;
        }
        Ok(Self {
            stages,
            head: Conv2d::new(cin, 1, 3, 1, 1, rng),
            sigmoid,
        })
    }

    pub fn fwd(&self, g: &mut Graph, tp: &mut ParamTape, x: NodeId) -> NodeId {
        let mut h = x;
        for st in &self.stages {
            h = st.conv.fwd(g, tp, h);
            h = g.leaky_relu(h);
        }
        let out = self.head.fwd(g, tp, h);
        if self.sigmoid {
            g.sigmoid(out)
        } else {
            out
        }
    }
}

impl Module for PatchDiscriminator {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)> {
        let mut out = Vec::new();
        for (i, st) in self.stages.iter().enumerate() {
            out.extend(nest(&format!("s{i}.conv"), st.conv.params()));
        }
        out.extend(nest("head", self.head.params()));
        out
    }
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)> {
        let mut out = Vec::new();
        for (i, st) in self.stages.iter_mut().enumerate() {
            out.extend(nest_mut(&format!("s{i}.conv"), st.conv.params_mut()));
        }
        out.extend(nest_mut("head", self.head.params_mut()));
        out
    }
}

// ---------------------------------------------------------------------------
// AdaIN
// ---------------------------------------------------------------------------

/// Per-channel style statistics for one AdaIN layer of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaInParams {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl AdaInParams {
    pub fn new(mean: Array1<f64>, std: Array1<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::ShapeMismatch(format!(
                "adain params: {} means vs {} stds",
                mean.len(),
                std.len()
            )));
        }
        if std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::ParamOutOfRange("adain std must be positive".into()));
        }
        Ok(Self { mean, std })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

/// Graph-level AdaIN: standardize `content` (N,C,H,W) per channel over
/// spatial dims, then scale by `std` and shift by `mean` (both (N,C)).
pub fn adain_node(g: &mut Graph, content: NodeId, mean: NodeId, std: NodeId) -> NodeId {
    let c = g.shape(content)[1];
    let n = g.shape(content)[0];
    let xn = standardize(g, content);
    let mean = g.reshape(mean, &[n, c, 1, 1]);
    let std = g.reshape(std, &[n, c, 1, 1]);
    let scaled = g.mul(xn, std);
    g.add(scaled, mean)
}

/// Adaptive instance normalization of a single (C,H,W) feature map.
///
/// Each channel is standardized to zero mean and unit std over its spatial
/// extent (std floored at [`crate::nn::NORM_EPS`]), then scaled by
/// `params.std` and shifted by `params.mean`.
pub fn adain(content: &ArrayD<f64>, params: &AdaInParams) -> Result<ArrayD<f64>> {
    let s = content.shape();
    if s.len() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "adain expects (C,H,W), got {s:?}"
        )));
    }
    if s[0] != params.channels() {
        return Err(Error::ShapeMismatch(format!(
            "adain: {} channels vs {} param pairs",
            s[0],
            params.channels()
        )));
    }
    let mut g = Graph::new();
    let x4 = content
        .clone()
        .into_shape_with_order(IxDyn(&[1, s[0], s[1], s[2]]))
        .unwrap();
    let x = g.constant(x4);
    let mean = g.constant(params.mean.clone().into_dyn().into_shape_with_order(IxDyn(&[1, s[0]])).unwrap());
    let std = g.constant(params.std.clone().into_dyn().into_shape_with_order(IxDyn(&[1, s[0]])).unwrap());
    let out = adain_node(&mut g, x, mean, std);
    Ok(g
        .value(out)
        .clone()
        .into_shape_with_order(IxDyn(s))
        .unwrap())
}

/// Residual block with two AdaIN-modulated convolutions:
/// x + AdaIN(conv2(act(AdaIN(conv1(x))))).
///
/// With zero-initialized convolutions and zero-mean styles the block is the
/// identity map, so a fresh generator starts as a pass-through.
pub struct AdaInResBlock {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
}

/// Graph nodes of the two (mean, std) style pairs feeding one block.
#[derive(Debug, Clone, Copy)]
pub struct BoundStyle {
    pub mean1: NodeId,
    pub std1: NodeId,
    pub mean2: NodeId,
    pub std2: NodeId,
}

impl AdaInResBlock {
    pub fn new(channels: usize, rng: &mut ChaCha20Rng) -> Self {
        Self {
            conv1: Conv2d::new(channels, channels, 3, 1, 1, rng),
            conv2: Conv2d::new(channels, channels, 3, 1, 1, rng),
        }
    }

    pub fn new_zeroed(channels: usize) -> Self {
        Self {
            conv1: Conv2d::new_zeroed(channels, channels, 3, 1, 1),
            conv2: Conv2d::new_zeroed(channels, channels, 3, 1, 1),
        }
    }

    pub fn fwd(&self, g: &mut Graph, tp: &mut ParamTape, x: NodeId, style: BoundStyle) -> NodeId {
        let h = self.conv1.fwd(g, tp, x);
        let h = adain_node(g, h, style.mean1, style.std1);
        let h = g.silu(h);
        let h = self.conv2.fwd(g, tp, h);
        let h = adain_node(g, h, style.mean2, style.std2);
        g.add(x, h)
    }
}

impl Module for AdaInResBlock {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)> {
        let mut out = nest("conv1", self.conv1.params());
        out.extend(nest("conv2", self.conv2.params()));
        out
    }
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)> {
        let mut out = nest_mut("conv1", self.conv1.params_mut());
        out.extend(nest_mut("conv2", self.conv2.params_mut()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::gradcheck;
    use crate::nn::seeded_rng;
    use ndarray::{Array1, ArrayD, IxDyn};
    use rand::prelude::*;

    fn randn(shape: &[usize], rng: &mut rand_chacha::ChaCha20Rng) -> ArrayD<f64> {
        let n: usize = shape.iter().product();
        ArrayD::from_shape_vec(
            IxDyn(shape),
            (0..n)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn adain_identity_params_standardize() {
        let mut rng = seeded_rng(11, "adain");
        let x = randn(&[2, 5, 5], &mut rng);
        let p = AdaInParams::new(Array1::zeros(2), Array1::ones(2)).unwrap();
        let y = adain(&x, &p).unwrap();
        for c in 0..2 {
            let ch = y.slice(ndarray::s![c, .., ..].as_ref());
            let mu = ch.mean().unwrap();
            let sd = ch.mapv(|v| (v - mu) * (v - mu)).mean().unwrap().sqrt();
            assert!(mu.abs() < 1e-12, "mean {mu}");
            assert!((sd - 1.0).abs() < 1e-12, "std {sd}");
        }
    }

    #[test]
    fn adain_affine_closed_form() {
        // Content already zero-mean unit-std per channel: output is exactly
        // 2*content + 3.
        let mut rng = seeded_rng(12, "adain2");
        let mut x = randn(&[1, 6, 6], &mut rng);
        let ch = x.slice(ndarray::s![0, .., ..].as_ref()).to_owned();
        let mu = ch.mean().unwrap();
        let sd = ch.mapv(|v| (v - mu) * (v - mu)).mean().unwrap().sqrt();
        x.mapv_inplace(|v| (v - mu) / sd);
        let p = AdaInParams::new(Array1::from_elem(1, 3.0), Array1::from_elem(1, 2.0)).unwrap();
        let y = adain(&x, &p).unwrap();
        let mut max_err = 0.0f64;
        ndarray::Zip::from(&y).and(&x).for_each(|&yy, &xx| {
            max_err = max_err.max((yy - (2.0 * xx + 3.0)).abs());
        });
        assert!(max_err < 1e-5, "max err {max_err}");
    }

    #[test]
    fn adain_self_style_is_identity() {
        let mut rng = seeded_rng(13, "adain3");
        let x = randn(&[3, 4, 4], &mut rng);
        let mut mean = Array1::zeros(3);
        let mut std = Array1::zeros(3);
        for c in 0..3 {
            let ch = x.slice(ndarray::s![c, .., ..].as_ref());
            let mu = ch.mean().unwrap();
            mean[c] = mu;
            std[c] = ch.mapv(|v| (v - mu) * (v - mu)).mean().unwrap().sqrt();
        }
        let y = adain(&x, &AdaInParams::new(mean, std).unwrap()).unwrap();
        let mut max_err = 0.0f64;
        ndarray::Zip::from(&y).and(&x).for_each(|&yy, &xx| {
            max_err = max_err.max((yy - xx).abs());
        });
        assert!(max_err < 1e-4, "max err {max_err}");
    }

    #[test]
    fn adain_output_statistics_match_style() {
        let mut rng = seeded_rng(14, "adain4");
        let x = randn(&[4, 8, 8], &mut rng);
        let mean = Array1::from_vec(vec![0.5, -1.0, 2.0, 0.0]);
        let std = Array1::from_vec(vec![0.5, 1.5, 2.0, 1.0]);
        let y = adain(&x, &AdaInParams::new(mean.clone(), std.clone()).unwrap()).unwrap();
        for c in 0..4 {
            let ch = y.slice(ndarray::s![c, .., ..].as_ref());
            let mu = ch.mean().unwrap();
            let sd = ch.mapv(|v| (v - mu) * (v - mu)).mean().unwrap().sqrt();
            assert!((mu - mean[c]).abs() < 1e-5, "mean {mu} vs {}", mean[c]);
            assert!((sd - std[c]).abs() < 1e-4, "std {sd} vs {}", std[c]);
        }
    }

    #[test]
    fn adain_channel_mismatch_errors() {
        let x = ArrayD::zeros(IxDyn(&[3, 4, 4]));
        let p = AdaInParams::new(Array1::zeros(2), Array1::ones(2)).unwrap();
        assert!(matches!(adain(&x, &p), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn adain_input_gradient_matches_finite_differences() {
        let mut rng = seeded_rng(15, "adain5");
        let x = randn(&[1, 2, 4, 4], &mut rng);
        let mean = randn(&[1, 2], &mut rng);
        let std = randn(&[1, 2], &mut rng).mapv(|v| v.abs() + 0.5);
        let rep = gradcheck(
            |g, ids| {
                let y = adain_node(g, ids[0], ids[1], ids[2]);
                let sq = g.square(y);
                g.mean_all(sq)
            },
            &[x, mean, std],
            1e-5,
        );
        assert!(rep.passes(1e-3), "max rel err {}", rep.max_rel_err);
    }

    #[test]
    fn zeroed_resblock_is_identity_under_zero_mean_style() {
        let mut rng = seeded_rng(16, "resblock");
        let block = AdaInResBlock::new_zeroed(3);
        let x = randn(&[2, 3, 6, 6], &mut rng);
        let mut g = Graph::new();
        let xid = g.constant(x.clone());
        let zero = g.constant(ArrayD::zeros(IxDyn(&[2, 3])));
        let one = g.constant(ArrayD::from_elem(IxDyn(&[2, 3]), 1.0));
        let mut tp = ParamTape::trainable();
        let y = block.fwd(
            &mut g,
            &mut tp,
            xid,
            BoundStyle { mean1: zero, std1: one, mean2: zero, std2: one },
        );
        assert_eq!(g.value(y), &x);
    }

    #[test]
    fn resblock_preserves_shape() {
        let mut rng = seeded_rng(17, "resblock2");
        let block = AdaInResBlock::new(4, &mut rng);
        let x = randn(&[1, 4, 8, 8], &mut rng);
        let mut g = Graph::new();
        let xid = g.constant(x.clone());
        let mean = g.constant(randn(&[1, 4], &mut rng));
        let std = g.constant(randn(&[1, 4], &mut rng).mapv(|v| v.abs() + 0.5));
        let mut tp = ParamTape::trainable();
        let y = block.fwd(
            &mut g,
            &mut tp,
            xid,
            BoundStyle { mean1: mean, std1: std, mean2: mean, std2: std },
        );
        assert_eq!(g.shape(y), x.shape());
    }

    #[test]
    fn resblock_input_gradient_matches_finite_differences() {
        let mut rng = seeded_rng(18, "resblock3");
        let block = AdaInResBlock::new(4, &mut rng);
        let x = randn(&[1, 4, 8, 8], &mut rng);
        let mean = randn(&[1, 4], &mut rng);
        let std = randn(&[1, 4], &mut rng).mapv(|v| v.abs() + 0.5);
        let rep = gradcheck(
            |g, ids| {
                let mut tp = ParamTape::frozen();
                let y = block.fwd(
                    g,
                    &mut tp,
                    ids[0],
                    BoundStyle { mean1: ids[1], std1: ids[2], mean2: ids[1], std2: ids[2] },
                );
                let sq = g.square(y);
                g.mean_all(sq)
            },
            &[x, mean, std],
            1e-5,
        );
        assert!(rep.passes(1e-3), "max rel err {}", rep.max_rel_err);
    }

    #[test]
    fn encoder_decoder_discriminator_shapes() {
        let mut rng = seeded_rng(19, "shapes");
        let gen_cfg = BlockConfig {
            stages: 4,
            base_width: 8,
            max_width: 64,
            res_blocks: 0,
            norm: NormKind::Instance,
        };
        let enc = Encoder::build(gen_cfg, 1, 64, Act::Silu, &mut rng).unwrap();
        let x = randn(&[2, 1, 64, 64], &mut rng);
        let mut g = Graph::new();
        let xid = g.constant(x);
        let mut tp = ParamTape::trainable();
        let z = enc.fwd(&mut g, &mut tp, xid);
        assert_eq!(g.shape(z), &[2, 64, 4, 4]);

        let dec = Decoder::build(gen_cfg, 64, 1, Head::Sigmoid, Act::Silu, &mut rng).unwrap();
        let y = dec.fwd(&mut g, &mut tp, z);
        assert_eq!(g.shape(y), &[2, 1, 64, 64]);

        let d_cfg = BlockConfig {
            stages: 3,
            base_width: 8,
            max_width: 64,
            res_blocks: 0,
            norm: NormKind::None,
        };
        let disc = PatchDiscriminator::build(d_cfg, 1, 64, true, &mut rng).unwrap();
        let s = disc.fwd(&mut g, &mut tp, y);
        assert_eq!(g.shape(s), &[2, 1, 8, 8]);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(BlockConfig {
            stages: 0,
            base_width: 32,
            max_width: 256,
            res_blocks: 0,
            norm: NormKind::None,
        }
        .validate(64)
        .is_err());
        assert!(BlockConfig {
            stages: 3,
            base_width: 24,
            max_width: 256,
            res_blocks: 0,
            norm: NormKind::None,
        }
        .validate(64)
        .is_err());
        assert!(BlockConfig {
            stages: 8,
            base_width: 32,
            max_width: 256,
            res_blocks: 0,
            norm: NormKind::None,
        }
        .validate(64)
        .is_err());
    }
}
