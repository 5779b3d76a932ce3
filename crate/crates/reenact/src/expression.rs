//! Expression enhancing stage: generator G restores detail in the rotated
//! face and imposes the driving expression.
//!
//! An expression encoder maps the transformed landmark image to a style
//! vector; per-block affine heads turn it into AdaIN statistics injected in
//! the generator's residual bottleneck. G consumes the channel concatenation
//! of the rotated face and the source face. Losses: pixel L1, a perceptual
//! distance over fixed feature extractors, and a log-loss adversarial term.

use crate::autodiff::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::img::{FaceImage, LandmarkImage};
use crate::nn::adam::{Adam, GAN_BETAS};
use crate::nn::blocks::{
    AdaInParams, AdaInResBlock, Act, BlockConfig, BoundStyle, Decoder, Encoder, Head,
    PatchDiscriminator,
};
use crate::nn::losses::{gan_d_loss, gan_g_loss, l1_node};
use crate::nn::{nest, nest_mut, seeded_rng, Conv2d, Linear, Module, ParamTape};
use crate::rotation::stack_face_images;
use crate::transformer::stack_landmark_images;
use ndarray::{Array1, ArrayD, IxDyn};

/// Softplus floor keeping AdaIN scale parameters strictly positive.
pub const STYLE_STD_FLOOR: f64 = 1e-3;

/// Style statistics for one residual block: one (mean, std) pair per AdaIN
/// layer, two layers per block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStyle {
    pub pre: AdaInParams,
    pub post: AdaInParams,
}

/// Expression encoder E_e: landmark image -> style vector -> per-block
/// AdaIN statistics through learned affine heads (softplus-floored stds).
pub struct ExpressionEncoder {
    pub enc: Encoder,
    pub to_style: Linear,
    pub heads: Vec<[Linear; 4]>, // per block: mean1, std1, mean2, std2
    pub style_dim: usize,
    pub block_channels: usize,
}

impl ExpressionEncoder {
    pub fn new(
        cfg: BlockConfig,
        resolution: usize,
        style_dim: usize,
        n_blocks: usize,
        block_channels: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = seeded_rng(seed, "expression-encoder");
        let enc = Encoder::build(cfg, 1, resolution, Act::Silu, &mut rng)?;
        let to_style = Linear::new(enc.out_channels(), style_dim, &mut rng);
        let heads = (0..n_blocks)
            .map(|_| {
                [
                    Linear::new(style_dim, block_channels, &mut rng),
                    Linear::new(style_dim, block_channels, &mut rng),
                    Linear::new(style_dim, block_channels, &mut rng),
                    Linear::new(style_dim, block_channels, &mut rng),
                ]
            })
            .collect();
        Ok(Self { enc, to_style, heads, style_dim, block_channels })
    }

    /// Per-block bound styles for an (N,1,R,R) landmark batch.
    pub fn encode_node(&self, g: &mut Graph, tp: &mut ParamTape, l: NodeId) -> Vec<BoundStyle> {
        let h = self.enc.fwd(g, tp, l);
        let pooled = g.global_avg_pool(h);
        let style = self.to_style.fwd(g, tp, pooled);
        let style = g.silu(style);
        let mut out = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let mean1 = head[0].fwd(g, tp, style);
            let s1 = head[1].fwd(g, tp, style);
            let s1 = g.softplus(s1);
            let std1 = g.add_scalar(s1, STYLE_STD_FLOOR);
            let mean2 = head[2].fwd(g, tp, style);
            let s2 = head[3].fwd(g, tp, style);
            let s2 = g.softplus(s2);
            let std2 = g.add_scalar(s2, STYLE_STD_FLOOR);
            out.push(BoundStyle { mean1, std1, mean2, std2 });
        }
        out
    }

    /// Deterministic per-block AdaIN statistics for one landmark image.
    pub fn encode_expression(&self, l: &LandmarkImage) -> Result<Vec<BlockStyle>> {
        let mut g = Graph::new();
        let x = g.constant(stack_landmark_images(&[l])?);
        let mut tp = ParamTape::frozen();
        let styles = self.encode_node(&mut g, &mut tp, x);
        let to1 = |g: &Graph, id: NodeId| {
            Array1::from_vec(g.value(id).iter().copied().collect::<Vec<_>>())
        };
        styles
            .iter()
            .map(|s| {
                Ok(BlockStyle {
                    pre: AdaInParams::new(to1(&g, s.mean1), to1(&g, s.std1))?,
                    post: AdaInParams::new(to1(&g, s.mean2), to1(&g, s.std2))?,
                })
            })
            .collect()
    }
}

impl Module for ExpressionEncoder {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)> {
        let mut out = nest("enc", self.enc.params());
        out.extend(nest("to_style", self.to_style.params()));
        for (i, head) in self.heads.iter().enumerate() {
            for (j, lin) in head.iter().enumerate() {
                out.extend(nest(&format!("head{i}.{j}"), lin.params()));
            }
        }
        out
    }
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)> {
        let mut out = nest_mut("enc", self.enc.params_mut());
        out.extend(nest_mut("to_style", self.to_style.params_mut()));
        for (i, head) in self.heads.iter_mut().enumerate() {
            for (j, lin) in head.iter_mut().enumerate() {
                out.extend(nest_mut(&format!("head{i}.{j}"), lin.params_mut()));
            }
        }
        out
    }
}

/// Enhancing generator G: encoder over concat(rotated, source), AdaIN
/// residual bottleneck, sigmoid decoder.
pub struct EnhancingGenerator {
    pub enc: Encoder,
    pub blocks: Vec<AdaInResBlock>,
    pub merge: Conv2d,
    pub dec: Decoder,
    pub resolution: usize,
}

impl EnhancingGenerator {
    pub fn new(cfg: BlockConfig, resolution: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed, "enhancer");
        let enc = Encoder::build(cfg, 6, resolution, Act::Silu, &mut rng)?;
        let c = enc.out_channels();
        let blocks = (0..cfg.res_blocks)
            .map(|_| AdaInResBlock::new(c, &mut rng))
            .collect();
        let merge = Conv2d::new(c, c, 3, 1, 1, &mut rng);
        let dec = Decoder::build(cfg, c, 3, Head::Sigmoid, Act::Silu, &mut rng)?;
        Ok(Self { enc, blocks, merge, dec, resolution })
    }

    pub fn enhance_node(
        &self,
        g: &mut Graph,
        tp: &mut ParamTape,
        rotated: NodeId,
        src: NodeId,
        styles: &[BoundStyle],
    ) -> NodeId {
        assert_eq!(styles.len(), self.blocks.len(), "style count vs blocks");
        let x = g.concat(&[rotated, src], 1);
        let mut h = self.enc.fwd(g, tp, x);
        for (block, style) in self.blocks.iter().zip(styles) {
            h = block.fwd(g, tp, h, *style);
        }
        let h2 = self.merge.fwd(g, tp, h);
        let h = g.silu(h2);
        self.dec.fwd(g, tp, h)
    }

    /// Reenact: enhance the rotated face with the source appearance and the
    /// expression statistics from the driving landmark image.
    pub fn enhance(
        &self,
        rotated: &FaceImage,
        src: &FaceImage,
        expr: &[BlockStyle],
    ) -> Result<FaceImage> {
        if rotated.height() != src.height() || rotated.width() != src.width() {
            return Err(Error::ShapeMismatch("enhance: face sizes differ".into()));
        }
        if expr.len() != self.blocks.len() {
            return Err(Error::ShapeMismatch(format!(
                "enhance: {} styles for {} blocks",
                expr.len(),
                self.blocks.len()
            )));
        }
        let mut g = Graph::new();
        let r = g.constant(stack_face_images(&[rotated])?);
        let s = g.constant(stack_face_images(&[src])?);
        let styles: Vec<BoundStyle> = expr
            .iter()
            .map(|b| {
                let pack = |g: &mut Graph, a: &Array1<f64>| {
                    g.constant(
                        a.clone()
                            .into_dyn()
                            .into_shape_with_order(IxDyn(&[1, a.len()]))
                            .unwrap(),
                    )
                };
                BoundStyle {
                    mean1: pack(&mut g, &b.pre.mean),
                    std1: pack(&mut g, &b.pre.std),
                    mean2: pack(&mut g, &b.post.mean),
                    std2: pack(&mut g, &b.post.std),
                }
            })
            .collect();
        let mut tp = ParamTape::frozen();
        let out = self.enhance_node(&mut g, &mut tp, r, s, &styles);
        FaceImage::from_chw(&g.value(out).index_axis(ndarray::Axis(0), 0))
    }
}

impl Module for EnhancingGenerator {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)> {
        let mut out = nest("enc", self.enc.params());
        for (i, b) in self.blocks.iter().enumerate() {
            out.extend(nest(&format!("block{i}"), b.params()));
        }
        out.extend(nest("merge", self.merge.params()));
        out.extend(nest("dec", self.dec.params()));
        out
    }
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)> {
        let mut out = nest_mut("enc", self.enc.params_mut());
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.extend(nest_mut(&format!("block{i}"), b.params_mut()));
        }
        out.extend(nest_mut("merge", self.merge.params_mut()));
        out.extend(nest_mut("dec", self.dec.params_mut()));
        out
    }
}

// ---------------------------------------------------------------------------
// Perceptual networks
// ---------------------------------------------------------------------------

/// Fixed-weight feature extractor interface: named tap layers and their
/// activations. Implementations must be deterministic and stay frozen while
/// the generator trains.
pub trait PerceptualNetwork {
    fn tap_names(&self) -> Vec<String>;
    /// Activations at every tap for an (N,3,H,W) image batch node.
    fn taps_node(&self, g: &mut Graph, image: NodeId) -> Vec<NodeId>;
}

/// Default perceptual network: a seeded fixed-random convolution stack.
/// Random fixed projections keep the pseudometric properties of a perceptual
/// distance without any external weights.
pub struct FixedPerceptualNet {
    convs: Vec<Conv2d>,
    include_input_tap: bool,
}

impl FixedPerceptualNet {
    pub fn new(widths: &[usize], seed: u64, include_input_tap: bool) -> Self {
        let mut rng = seeded_rng(seed, "perceptual");
        let mut convs = Vec::new();
        let mut cin = 3;
        for &w in widths {
            convs.push(Conv2d::new(cin, w, 3, 2, 1, &mut rng));
            cin = w;
        }
        Self { convs, include_input_tap }
    }

    /// Two standard instances seeded from the run seed, standing in for the
    /// classification and face-verification networks.
    pub fn default_pair(seed: u64) -> (Self, Self) {
        (
            Self::new(&[16, 32, 64], crate::nn::derive_seed(seed, "per-a"), false),
            Self::new(&[16, 32, 64], crate::nn::derive_seed(seed, "per-b"), false),
        )
    }
}

impl PerceptualNetwork for FixedPerceptualNet {
    fn tap_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.include_input_tap {
            names.push("input".to_string());
        }
        names.extend((0..self.convs.len()).map(|i| format!("conv{i}")));
        names
    }

    fn taps_node(&self, g: &mut Graph, image: NodeId) -> Vec<NodeId> {
        let mut tp = ParamTape::frozen();
        let mut taps = Vec::new();
        if self.include_input_tap {
            taps.push(image);
        }
        let mut h = image;
        for conv in &self.convs {
            h = conv.fwd(g, &mut tp, h);
            h = g.silu(h);
            taps.push(h);
        }
        taps
    }
}

/// Graph-level perceptual loss: sum over networks and taps of the summed
/// absolute activation differences, averaged over the batch.
pub fn loss_per_node(
    g: &mut Graph,
    nets: &[&dyn PerceptualNetwork],
    pred: NodeId,
    gt: NodeId,
) -> NodeId {
    let n = g.shape(pred)[0] as f64;
    let mut total = g.scalar_const(0.0);
    for net in nets {
        let tp = net.taps_node(g, pred);
        let tg = net.taps_node(g, gt);
        for (a, b) in tp.into_iter().zip(tg) {
            let d = g.sub(a, b);
            let d = g.abs(d);
            let s = g.sum_all(d);
            let s = g.mul_scalar(s, 1.0 / n);
            total = g.add(total, s);
        }
    }
    total
}

/// Perceptual distance between two faces under fixed extractor networks.
pub fn loss_per(
    nets: &[&dyn PerceptualNetwork],
    pred: &FaceImage,
    gt: &FaceImage,
) -> Result<f64> {
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(Error::ShapeMismatch("loss_per: face sizes differ".into()));
    }
    let mut g = Graph::new();
    let a = g.constant(stack_face_images(&[pred])?);
    let b = g.constant(stack_face_images(&[gt])?);
    let node = loss_per_node(&mut g, nets, a, b);
    Ok(g.scalar(node))
}

/// Pixel L1 between the reenacted face and its ground truth.
pub fn loss_pix(pred: &FaceImage, gt: &FaceImage) -> Result<f64> {
    pred.l1(gt)
}

/// Adversarial log loss on face batches (shared arithmetic with the
/// landmark stage, separate discriminator instance): (d_loss, g_loss).
pub fn loss_adv_g(
    d: &PatchDiscriminator,
    real: &ArrayD<f64>,
    fake: &ArrayD<f64>,
) -> Result<(f64, f64)> {
    if real.shape() != fake.shape() {
        return Err(Error::ShapeMismatch(format!(
            "loss_adv_g: {:?} vs {:?}",
            real.shape(),
            fake.shape()
        )));
    }
    let mut g = Graph::new();
    let r = g.constant(real.clone());
    let f = g.constant(fake.clone());
    let mut tp = ParamTape::frozen();
    let dr = d.fwd(&mut g, &mut tp, r);
    let df = d.fwd(&mut g, &mut tp, f);
    let dl = gan_d_loss(&mut g, dr, df);
    let gl = gan_g_loss(&mut g, df);
    Ok((g.scalar(dl), g.scalar(gl)))
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ExpressionWeights {
    pub pix: f64,
    pub per: f64,
    pub adv: f64,
}

impl Default for ExpressionWeights {
    fn default() -> Self {
        Self { pix: 10.0, per: 0.002, adv: 0.05 }
    }
}

/// One generator batch: rotated faces (teacher ground truth or frozen-R
/// output), source faces, conditioning landmark images, and targets.
pub struct ExpressionBatch {
    pub rotated: ArrayD<f64>,
    pub src_face: ArrayD<f64>,
    pub landmarks: ArrayD<f64>,
    pub target: ArrayD<f64>,
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct ExpressionLossReport {
    pub pix: f64,
    pub per: f64,
    pub adv_g: f64,
    pub total: f64,
    pub d_loss: f64,
}

pub struct ExpressionTrainer {
    pub gen: EnhancingGenerator,
    pub expr_enc: ExpressionEncoder,
    pub disc: PatchDiscriminator,
    pub perceptual_a: FixedPerceptualNet,
    pub perceptual_b: FixedPerceptualNet,
    pub opt_gen: Adam,
    pub opt_enc: Adam,
    pub opt_disc: Adam,
}

impl ExpressionTrainer {
    pub fn new(
        cfg: BlockConfig,
        disc_cfg: BlockConfig,
        resolution: usize,
        style_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        let gen = EnhancingGenerator::new(cfg, resolution, seed)?;
        let expr_enc = ExpressionEncoder::new(
            cfg,
            resolution,
            style_dim,
            cfg.res_blocks,
            gen.enc.out_channels(),
            seed,
        )?;
        let mut rng = seeded_rng(seed, "enhancer-disc");
        let disc = PatchDiscriminator::build(disc_cfg, 3, resolution, true, &mut rng)?;
        let (perceptual_a, perceptual_b) = FixedPerceptualNet::default_pair(seed);
        let opt_gen = Adam::new(&gen.params(), GAN_BETAS);
        let opt_enc = Adam::new(&expr_enc.params(), GAN_BETAS);
        let opt_disc = Adam::new(&disc.params(), GAN_BETAS);
        Ok(Self { gen, expr_enc, disc, perceptual_a, perceptual_b, opt_gen, opt_enc, opt_disc })
    }

    /// One step for the discriminator and one joint step for G and E_e.
    pub fn train_step(
        &mut self,
        batch: &ExpressionBatch,
        w: &ExpressionWeights,
        lr: f64,
    ) -> Result<ExpressionLossReport> {
        let mut report = ExpressionLossReport::default();

        // Discriminator step against frozen generator fakes.
        {
            let mut g = Graph::new();
            let rot = g.constant(batch.rotated.clone());
            let src = g.constant(batch.src_face.clone());
            let lm = g.constant(batch.landmarks.clone());
            let real = g.constant(batch.target.clone());
            let mut tp_frozen = ParamTape::frozen();
            let styles = self.expr_enc.encode_node(&mut g, &mut tp_frozen, lm);
            let fake = self.gen.enhance_node(&mut g, &mut tp_frozen, rot, src, &styles);
            let mut tp = ParamTape::trainable();
            let dr = self.disc.fwd(&mut g, &mut tp, real);
            let df = self.disc.fwd(&mut g, &mut tp, fake);
            let dl = gan_d_loss(&mut g, dr, df);
            report.d_loss = g.scalar(dl);
            g.backward(dl);
            let grads = tp.grads(&g, &self.disc.params());
            self.opt_disc.step(&mut self.disc.params_mut(), &grads, lr);
        }

        // Generator + expression encoder step.
        {
            let mut g = Graph::new();
            let rot = g.constant(batch.rotated.clone());
            let src = g.constant(batch.src_face.clone());
            let lm = g.constant(batch.landmarks.clone());
            let gt = g.constant(batch.target.clone());
            let mut tp = ParamTape::trainable();
            let styles = self.expr_enc.encode_node(&mut g, &mut tp, lm);
            let fake = self.gen.enhance_node(&mut g, &mut tp, rot, src, &styles);

            let pix = l1_node(&mut g, fake, gt);
            let per = loss_per_node(
                &mut g,
                &[&self.perceptual_a, &self.perceptual_b],
                fake,
                gt,
            );
            let mut tp_d = ParamTape::frozen();
            let df = self.disc.fwd(&mut g, &mut tp_d, fake);
            let adv = gan_g_loss(&mut g, df);

            let wp = g.mul_scalar(pix, w.pix);
            let wr = g.mul_scalar(per, w.per);
            let wa = g.mul_scalar(adv, w.adv);
            let mut total = g.add(wp, wr);
            total = g.add(total, wa);

            report.pix = g.scalar(pix);
            report.per = g.scalar(per);
            report.adv_g = g.scalar(adv);
            report.total = g.scalar(total);
            g.backward(total);

            let g_grads = tp.grads(&g, &self.gen.params());
            let e_grads = tp.grads(&g, &self.expr_enc.params());
            self.opt_gen.step(&mut self.gen.params_mut(), &g_grads, lr);
            self.opt_enc.step(&mut self.expr_enc.params_mut(), &e_grads, lr);
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::raster::render_landmark_image;
    use crate::landmarks::synth::{render_synthetic_face, synth_landmarks, SynthFaceParams};
    use crate::nn::blocks::NormKind;

    fn tiny_cfg() -> BlockConfig {
        BlockConfig { stages: 2, base_width: 4, max_width: 16, res_blocks: 2, norm: NormKind::Instance }
    }
    fn tiny_disc() -> BlockConfig {
        BlockConfig { stages: 2, base_width: 4, max_width: 16, res_blocks: 0, norm: NormKind::None }
    }

    fn sample(mouth: f64) -> (FaceImage, LandmarkImage) {
        let p = SynthFaceParams {
            identity: [0.1; 6],
            expression: [mouth, 0.0, 0.0, 0.7],
            yaw: 0.0,
        };
        (
            render_synthetic_face(&p, 32).unwrap(),
            render_landmark_image(&synth_landmarks(&p).unwrap(), 32).unwrap(),
        )
    }

    #[test]
    fn encode_expression_stds_positive_and_deterministic() {
        let e = ExpressionEncoder::new(tiny_cfg(), 32, 8, 2, 16, 41).unwrap();
        let (_, lm) = sample(0.8);
        let s1 = e.encode_expression(&lm).unwrap();
        let s2 = e.encode_expression(&lm).unwrap();
        assert_eq!(s1.len(), 2);
        assert_eq!(s1, s2);
        for b in &s1 {
            assert!(b.pre.std.iter().all(|&v| v > 0.0));
            assert!(b.post.std.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn different_mouth_landmarks_give_different_styles() {
        let e = ExpressionEncoder::new(tiny_cfg(), 32, 8, 2, 16, 42).unwrap();
        let (_, open) = sample(1.0);
        let (_, closed) = sample(0.0);
        let a = e.encode_expression(&open).unwrap();
        let b = e.encode_expression(&closed).unwrap();
        let dist: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| {
                (&x.pre.mean - &y.pre.mean).mapv(f64::abs).sum()
                    + (&x.post.mean - &y.post.mean).mapv(f64::abs).sum()
            })
            .sum();
        assert!(dist > 0.0);
    }

    #[test]
    fn enhance_shape_determinism_bounds() {
        let gen = EnhancingGenerator::new(tiny_cfg(), 32, 43).unwrap();
        let e = ExpressionEncoder::new(tiny_cfg(), 32, 8, 2, gen.enc.out_channels(), 43).unwrap();
        let (face, lm) = sample(0.5);
        let styles = e.encode_expression(&lm).unwrap();
        let a = gen.enhance(&face, &face, &styles).unwrap();
        let b = gen.enhance(&face, &face, &styles).unwrap();
        assert_eq!(a.height(), 32);
        assert_eq!(a.data, b.data);
        assert!(a.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn enhance_style_count_mismatch_errors() {
        let gen = EnhancingGenerator::new(tiny_cfg(), 32, 44).unwrap();
        let (face, _) = sample(0.5);
        assert!(matches!(
            gen.enhance(&face, &face, &[]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn perceptual_loss_is_a_pseudometric() {
        let (na, nb) = FixedPerceptualNet::default_pair(45);
        let nets: Vec<&dyn PerceptualNetwork> = vec![&na, &nb];
        let (x, _) = sample(0.2);
        let (y, _) = sample(0.9);
        assert_eq!(loss_per(&nets, &x, &x).unwrap(), 0.0);
        let ab = loss_per(&nets, &x, &y).unwrap();
        let ba = loss_per(&nets, &y, &x).unwrap();
        assert!(ab > 0.0);
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn input_tap_reduction_matches_scaled_l1() {
        // A single network whose only tap is the raw input layer: the
        // perceptual loss equals (H*W*C) * image_l1 under sum reduction.
        let net = FixedPerceptualNet::new(&[], 46, true);
        let nets: Vec<&dyn PerceptualNetwork> = vec![&net];
        let (x, _) = sample(0.1);
        let (y, _) = sample(0.8);
        let per = loss_per(&nets, &x, &y).unwrap();
        let l1 = x.l1(&y).unwrap();
        let scale = (32 * 32 * 3) as f64;
        assert!((per - scale * l1).abs() < 1e-9, "{per} vs {}", scale * l1);
    }

    #[test]
    fn perceptual_loss_matches_bruteforce_tap_accumulation() {
        let net = FixedPerceptualNet::new(&[4, 8], 47, false);
        let (x, _) = sample(0.3);
        let (y, _) = sample(0.6);
        let nets: Vec<&dyn PerceptualNetwork> = vec![&net];
        let got = loss_per(&nets, &x, &y).unwrap();

        // Brute force: evaluate taps separately and accumulate per-element.
        let mut g = Graph::new();
        let a = g.constant(stack_face_images(&[&x]).unwrap());
        let b = g.constant(stack_face_images(&[&y]).unwrap());
        let ta = net.taps_node(&mut g, a);
        let tb = net.taps_node(&mut g, b);
        let mut acc = 0.0;
        for (p, q) in ta.iter().zip(&tb) {
            let va = g.value(*p);
            let vb = g.value(*q);
            for (u, v) in va.iter().zip(vb.iter()) {
                acc += (u - v).abs();
            }
        }
        assert!((got - acc).abs() < 1e-9, "{got} vs {acc}");
    }

    #[test]
    fn zero_weights_leave_generator_unchanged_and_total_is_weighted_sum() {
        let mut tr = ExpressionTrainer::new(tiny_cfg(), tiny_disc(), 32, 8, 48).unwrap();
        let (face, lm) = sample(0.4);
        let (gt, _) = sample(0.9);
        let batch = ExpressionBatch {
            rotated: stack_face_images(&[&face]).unwrap(),
            src_face: stack_face_images(&[&face]).unwrap(),
            landmarks: stack_landmark_images(&[&lm]).unwrap(),
            target: stack_face_images(&[&gt]).unwrap(),
        };
        let before: Vec<ArrayD<f64>> =
            tr.gen.params().iter().map(|(_, p)| (*p).clone()).collect();
        tr.train_step(&batch, &ExpressionWeights { pix: 0.0, per: 0.0, adv: 0.0 }, 1e-3)
            .unwrap();
        for ((_, after), b) in tr.gen.params().iter().zip(&before) {
            assert_eq!(*after, b);
        }

        let w = ExpressionWeights { pix: 2.0, per: 0.01, adv: 0.3 };
        let r = tr.train_step(&batch, &w, 1e-4).unwrap();
        let hand = w.pix * r.pix + w.per * r.per + w.adv * r.adv_g;
        assert!((r.total - hand).abs() < 1e-6);
    }
}
