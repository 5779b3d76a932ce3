//! Landmark transformer stage: retargets a driving landmark image to the
//! source identity by predicting an additive shift image.
//!
//! The transformer is trained with five terms: pixel L1 against the ground
//! truth, a same-identity reconstruction loss, a two-hop cycle loss, an
//! identity-feature loss from a jointly trained classifier, and an
//! adversarial realness loss from a patch discriminator. The classifier's
//! cross-entropy never backpropagates into the transformer; only the frozen
//! feature distance does.

use crate::autodiff::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::img::{image_l1, LandmarkImage};
use crate::nn::adam::{Adam, GAN_BETAS};
use crate::nn::blocks::{Act, BlockConfig, Decoder, Encoder, Head, PatchDiscriminator};
use crate::nn::losses::{gan_d_loss, gan_g_loss, l1_node};
use crate::nn::{nest, nest_mut, seeded_rng, Linear, Module, ParamTape};
use ndarray::{Array1, ArrayD, IxDyn};

/// Stack single-channel landmark images into an (N,1,R,R) batch tensor.
pub fn stack_landmark_images(images: &[&LandmarkImage]) -> Result<ArrayD<f64>> {
    let r = images
        .first()
        .ok_or_else(|| Error::ShapeMismatch("empty landmark batch".into()))?
        .resolution();
    let mut out = ArrayD::zeros(IxDyn(&[images.len(), 1, r, r]));
    for (n, img) in images.iter().enumerate() {
        if img.resolution() != r {
            return Err(Error::ShapeMismatch(format!(
                "landmark batch mixes resolutions {r} and {}",
                img.resolution()
            )));
        }
        let mut slot = out.slice_mut(ndarray::s![n, 0, .., ..].as_ref());
        slot.assign(&img.pixels);
    }
    Ok(out)
}

/// Landmark transformer T: source branch encoder, driving branch encoder,
/// and a zero-initialized shift decoder.
///
/// `transform(L_sp, L_dq) = clamp(L_dq + D1(E1(L_sp), E2(L_dq)), 0, 1)`;
/// the zero-initialized head makes the untrained transformer exactly the
/// identity on its driving input.
pub struct LandmarkTransformer {
    pub e1: Encoder,
    pub e2: Encoder,
    pub d1: Decoder,
    pub resolution: usize,
}

impl LandmarkTransformer {
    pub fn new(cfg: BlockConfig, resolution: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed, "transformer");
        let e1 = Encoder::build(cfg, 1, resolution, Act::Silu, &mut rng)?;
        let e2 = Encoder::build(cfg, 1, resolution, Act::Silu, &mut rng)?;
        let d1 = Decoder::build(
            cfg,
            e1.out_channels() + e2.out_channels(),
            1,
            Head::ZeroLinear,
            Act::Silu,
            &mut rng,
        )?;
        Ok(Self { e1, e2, d1, resolution })
    }

    /// Graph-level transform on (N,1,R,R) batches.
    pub fn transform_node(
        &self,
        g: &mut Graph,
        tp: &mut ParamTape,
        l_sp: NodeId,
        l_dq: NodeId,
    ) -> NodeId {
        let f1 = self.e1.fwd(g, tp, l_sp);
        let f2 = self.e2.fwd(g, tp, l_dq);
        let z = g.concat(&[f1, f2], 1);
        let shift = self.d1.fwd(g, tp, z);
        let sum = g.add(l_dq, shift);
        g.clamp(sum, 0.0, 1.0)
    }

    /// Adapt a driving landmark image to the source identity.
    pub fn transform(&self, l_sp: &LandmarkImage, l_dq: &LandmarkImage) -> Result<LandmarkImage> {
        if l_sp.resolution() != l_dq.resolution() {
            return Err(Error::ShapeMismatch(format!(
                "transform: {} vs {}",
                l_sp.resolution(),
                l_dq.resolution()
            )));
        }
        let mut g = Graph::new();
        let a = g.constant(stack_landmark_images(&[l_sp])?);
        let b = g.constant(stack_landmark_images(&[l_dq])?);
        let mut tp = ParamTape::frozen();
        let out = self.transform_node(&mut g, &mut tp, a, b);
        let r = l_dq.resolution();
        let pixels = g
            .value(out)
            .clone()
            .into_shape_with_order(IxDyn(&[r, r]))
            .unwrap()
            .into_dimensionality()
            .unwrap();
        Ok(LandmarkImage::new(pixels))
    }
}

impl Module for LandmarkTransformer {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)> {
        let mut out = nest("e1", self.e1.params());
        out.extend(nest("e2", self.e2.params()));
        out.extend(nest("d1", self.d1.params()));
        out
    }
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)> {
        let mut out = nest_mut("e1", self.e1.params_mut());
        out.extend(nest_mut("e2", self.e2.params_mut()));
        out.extend(nest_mut("d1", self.d1.params_mut()));
        out
    }
}

/// Identity classifier over landmark images: logits for training identities
/// plus a penultimate feature vector used by the identity loss.
pub struct IdentityClassifier {
    pub enc: Encoder,
    pub feat: Linear,
    pub head: Linear,
    pub feat_dim: usize,
    pub n_classes: usize,
}

impl IdentityClassifier {
    pub fn new(
        cfg: BlockConfig,
        resolution: usize,
        feat_dim: usize,
        n_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = seeded_rng(seed, "id-classifier");
        let enc = Encoder::build(cfg, 1, resolution, Act::LeakyRelu, &mut rng)?;
        let feat = Linear::new(enc.out_channels(), feat_dim, &mut rng);
        let head = Linear::new(feat_dim, n_classes, &mut rng);
        Ok(Self { enc, feat, head, feat_dim, n_classes })
    }

    /// (logits, features) graph nodes for an (N,1,R,R) batch.
    pub fn classify_node(
        &self,
        g: &mut Graph,
        tp: &mut ParamTape,
        x: NodeId,
    ) -> (NodeId, NodeId) {
        let h = self.enc.fwd(g, tp, x);
        let pooled = g.global_avg_pool(h);
        let f = self.feat.fwd(g, tp, pooled);
        let f = g.silu(f);
        let logits = self.head.fwd(g, tp, f);
        (logits, f)
    }

    /// Logits over training identities and the penultimate feature vector.
    pub fn classify_identity(&self, l: &LandmarkImage) -> Result<(Array1<f64>, Array1<f64>)> {
        let mut g = Graph::new();
        let x = g.constant(stack_landmark_images(&[l])?);
        let mut tp = ParamTape::frozen();
        let (logits, feat) = self.classify_node(&mut g, &mut tp, x);
        let to1 = |v: &ArrayD<f64>| {
            Array1::from_vec(v.iter().copied().collect::<Vec<_>>())
        };
        Ok((to1(g.value(logits)), to1(g.value(feat))))
    }
}

impl Module for IdentityClassifier {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)> {
        let mut out = nest("enc", self.enc.params());
        out.extend(nest("feat", self.feat.params()));
        out.extend(nest("head", self.head.params()));
        out
    }
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)> {
        let mut out = nest_mut("enc", self.enc.params_mut());
        out.extend(nest_mut("feat", self.feat.params_mut()));
        out.extend(nest_mut("head", self.head.params_mut()));
        out
    }
}

// ---------------------------------------------------------------------------
// Value-level losses (delegating to the same graph builders the trainer uses)
// ---------------------------------------------------------------------------

/// Pixel-wise L1 between a transformed landmark image and its ground truth.
pub fn loss_l1_t(pred: &LandmarkImage, gt: &LandmarkImage) -> Result<f64> {
    pred.l1(gt)
}

/// Reconstruction loss under an arbitrary transform function:
/// `L_rec = l1(T(L_sp, L_sq), L_sq)` for same-identity inputs.
pub fn loss_rec_fn<F>(transform: F, l_sp: &LandmarkImage, l_sq: &LandmarkImage) -> Result<f64>
where
    F: Fn(&LandmarkImage, &LandmarkImage) -> Result<LandmarkImage>,
{
    transform(l_sp, l_sq)?.l1(l_sq)
}

pub fn loss_rec(
    t: &LandmarkTransformer,
    l_sp: &LandmarkImage,
    l_sq: &LandmarkImage,
) -> Result<f64> {
    loss_rec_fn(|a, b| t.transform(a, b), l_sp, l_sq)
}

/// Cycle loss under an arbitrary transform function:
/// `L_cycle = l1(T(L_dp, T(L_sp, L_dq)), L_dq)`.
pub fn loss_cycle_fn<F>(
    transform: F,
    l_sp: &LandmarkImage,
    l_dq: &LandmarkImage,
    l_dp: &LandmarkImage,
) -> Result<f64>
where
    F: Fn(&LandmarkImage, &LandmarkImage) -> Result<LandmarkImage>,
{
    let hop1 = transform(l_sp, l_dq)?;
    transform(l_dp, &hop1)?.l1(l_dq)
}

pub fn loss_cycle(
    t: &LandmarkTransformer,
    l_sp: &LandmarkImage,
    l_dq: &LandmarkImage,
    l_dp: &LandmarkImage,
) -> Result<f64> {
    loss_cycle_fn(|a, b| t.transform(a, b), l_sp, l_dq, l_dp)
}

/// Mean absolute distance between identity features of two landmark images.
pub fn loss_id(
    c: &IdentityClassifier,
    a: &LandmarkImage,
    b: &LandmarkImage,
) -> Result<f64> {
    let (_, fa) = c.classify_identity(a)?;
    let (_, fb) = c.classify_identity(b)?;
    image_l1(&fa.view().into_dyn(), &fb.view().into_dyn())
}

/// Adversarial log loss on landmark images: returns (d_loss, g_loss).
pub fn loss_adv_t(
    d: &PatchDiscriminator,
    real: &ArrayD<f64>,
    fake: &ArrayD<f64>,
) -> Result<(f64, f64)> {
    if real.shape() != fake.shape() {
        return Err(Error::ShapeMismatch(format!(
            "loss_adv: {:?} vs {:?}",
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

/// Loss weights of the transformer objective.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct TransformerWeights {
    pub l1: f64,
    pub rec: f64,
    pub cycle: f64,
    pub id: f64,
    pub adv: f64,
}

impl Default for TransformerWeights {
    /// Defaults chosen so the nonzero terms sit within one order of
    /// magnitude at initialization on the synthetic set.
    fn default() -> Self {
        Self { l1: 10.0, rec: 10.0, cycle: 10.0, id: 1.0, adv: 0.05 }
    }
}

/// One training batch: four landmark-image tensors (N,1,R,R) plus identity
/// labels for the classifier.
pub struct TransformerBatch {
    pub l_sp: ArrayD<f64>,
    pub l_dq: ArrayD<f64>,
    pub l_sq: ArrayD<f64>,
    pub l_dp: ArrayD<f64>,
    pub src_labels: Vec<usize>,
    pub drv_labels: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct TransformerLossReport {
    pub l1: f64,
    pub rec: f64,
    pub cycle: f64,
    pub id: f64,
    pub adv_g: f64,
    pub total: f64,
    pub d_loss: f64,
    pub classifier_ce: f64,
}

/// Owns the transformer, its discriminator and identity classifier, and one
/// Adam optimizer per network.
pub struct TransformerTrainer {
    pub net: LandmarkTransformer,
    pub disc: PatchDiscriminator,
    pub classifier: IdentityClassifier,
    pub opt_net: Adam,
    pub opt_disc: Adam,
    pub opt_cls: Adam,
}

impl TransformerTrainer {
    pub fn new(
        cfg: BlockConfig,
        disc_cfg: BlockConfig,
        resolution: usize,
        feat_dim: usize,
        n_identities: usize,
        seed: u64,
    ) -> Result<Self> {
        let net = LandmarkTransformer::new(cfg, resolution, seed)?;
        let mut rng = seeded_rng(seed, "transformer-disc");
        let disc = PatchDiscriminator::build(disc_cfg, 1, resolution, true, &mut rng)?;
        let classifier =
            IdentityClassifier::new(disc_cfg, resolution, feat_dim, n_identities, seed)?;
        let opt_net = Adam::new(&net.params(), GAN_BETAS);
        let opt_disc = Adam::new(&disc.params(), GAN_BETAS);
        let opt_cls = Adam::new(&classifier.params(), GAN_BETAS);
        Ok(Self { net, disc, classifier, opt_net, opt_disc, opt_cls })
    }

    /// One optimizer step each for the classifier, the discriminator and the
    /// transformer. Returns every weighted term of the total objective.
    pub fn train_step(
        &mut self,
        batch: &TransformerBatch,
        w: &TransformerWeights,
        lr: f64,
    ) -> Result<TransformerLossReport> {
        let n = batch.l_sp.shape()[0];
        if batch.src_labels.len() != n || batch.drv_labels.len() != n {
            return Err(Error::ShapeMismatch("label count vs batch".into()));
        }
        let mut report = TransformerLossReport::default();

        // Classifier step: cross-entropy on real landmark images only.
        {
            let mut g = Graph::new();
            let reals = ndarray::concatenate(
                ndarray::Axis(0),
                &[batch.l_sp.view(), batch.l_dq.view()],
            )
            .unwrap();
            let labels: Vec<usize> = batch
                .src_labels
                .iter()
                .chain(batch.drv_labels.iter())
                .copied()
                .collect();
            let x = g.constant(reals);
            let mut tp = ParamTape::trainable();
            let (logits, _) = self.classifier.classify_node(&mut g, &mut tp, x);
            let ce = g.cross_entropy(logits, &labels);
            report.classifier_ce = g.scalar(ce);
            g.backward(ce);
            let grads = tp.grads(&g, &self.classifier.params());
            self.opt_cls.step(&mut self.classifier.params_mut(), &grads, lr);
        }

        // Discriminator step: frozen transformer supplies the fakes.
        {
            let mut g = Graph::new();
            let sp = g.constant(batch.l_sp.clone());
            let dq = g.constant(batch.l_dq.clone());
            let sq = g.constant(batch.l_sq.clone());
            let mut tp_frozen = ParamTape::frozen();
            let fake = self.net.transform_node(&mut g, &mut tp_frozen, sp, dq);
            let mut tp = ParamTape::trainable();
            let d_real = self.disc.fwd(&mut g, &mut tp, sq);
            let d_fake = self.disc.fwd(&mut g, &mut tp, fake);
            let dl = gan_d_loss(&mut g, d_real, d_fake);
            report.d_loss = g.scalar(dl);
            g.backward(dl);
            let grads = tp.grads(&g, &self.disc.params());
            self.opt_disc.step(&mut self.disc.params_mut(), &grads, lr);
        }

        // Transformer step: all five terms of the total objective.
        {
            let mut g = Graph::new();
            let sp = g.constant(batch.l_sp.clone());
            let dq = g.constant(batch.l_dq.clone());
            let sq = g.constant(batch.l_sq.clone());
            let dp = g.constant(batch.l_dp.clone());
            let mut tp = ParamTape::trainable();

            let fake = self.net.transform_node(&mut g, &mut tp, sp, dq);
            let l1 = l1_node(&mut g, fake, sq);

            let rec_out = self.net.transform_node(&mut g, &mut tp, sp, sq);
            let rec = l1_node(&mut g, rec_out, sq);

            let cyc_out = self.net.transform_node(&mut g, &mut tp, dp, fake);
            let cycle = l1_node(&mut g, cyc_out, dq);

            // Identity features through the frozen classifier; gradients
            // still flow into the transformer via `fake`.
            let mut tp_cls = ParamTape::frozen();
            let (_, f_real) = self.classifier.classify_node(&mut g, &mut tp_cls, sp);
            let (_, f_fake) = self.classifier.classify_node(&mut g, &mut tp_cls, fake);
            let id = l1_node(&mut g, f_fake, f_real);

            let mut tp_d = ParamTape::frozen();
            let d_fake = self.disc.fwd(&mut g, &mut tp_d, fake);
            let adv_g = gan_g_loss(&mut g, d_fake);

            let wl1 = g.mul_scalar(l1, w.l1);
            let wrec = g.mul_scalar(rec, w.rec);
            let wcyc = g.mul_scalar(cycle, w.cycle);
            let wid = g.mul_scalar(id, w.id);
            let wadv = g.mul_scalar(adv_g, w.adv);
            let mut total = g.add(wl1, wrec);
            total = g.add(total, wcyc);
            total = g.add(total, wid);
            total = g.add(total, wadv);

            report.l1 = g.scalar(l1);
            report.rec = g.scalar(rec);
            report.cycle = g.scalar(cycle);
            report.id = g.scalar(id);
            report.adv_g = g.scalar(adv_g);
            report.total = g.scalar(total);

            g.backward(total);
            let grads = tp.grads(&g, &self.net.params());
            self.opt_net.step(&mut self.net.params_mut(), &grads, lr);
        }

        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::raster::render_landmark_image;
    use crate::landmarks::synth::{synth_landmarks, SynthFaceParams};
    use ndarray::Array2;
    use rand::prelude::*;

    fn tiny_cfg() -> BlockConfig {
        BlockConfig {
            stages: 2,
            base_width: 4,
            max_width: 16,
            res_blocks: 0,
            norm: crate::nn::blocks::NormKind::Instance,
        }
    }

    fn tiny_disc_cfg() -> BlockConfig {
        BlockConfig {
            stages: 2,
            base_width: 4,
            max_width: 16,
            res_blocks: 0,
            norm: crate::nn::blocks::NormKind::None,
        }
    }

    fn random_landmark_image(res: usize, seed: u64) -> LandmarkImage {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        LandmarkImage::new(Array2::from_shape_fn((res, res), |_| rng.random::<f64>()))
    }

    fn synth_image(id_seed: f64, expr: f64, yaw: f64, res: usize) -> LandmarkImage {
        let p = SynthFaceParams {
            identity: [id_seed, -id_seed, 0.4 * id_seed, 0.0, 0.0, 0.0],
            expression: [expr.clamp(0.0, 1.0), 0.0, 0.0, 0.7],
            yaw,
        };
        render_landmark_image(&synth_landmarks(&p).unwrap(), res).unwrap()
    }

    #[test]
    fn fresh_transformer_is_identity_on_driving_input() {
        let t = LandmarkTransformer::new(tiny_cfg(), 32, 3).unwrap();
        let sp = random_landmark_image(32, 1);
        let dq = random_landmark_image(32, 2);
        let out = t.transform(&sp, &dq).unwrap();
        assert_eq!(out.pixels, dq.pixels);
    }

    #[test]
    fn transform_output_shape_and_determinism() {
        let t = LandmarkTransformer::new(tiny_cfg(), 32, 4).unwrap();
        let sp = synth_image(0.5, 0.2, 0.0, 32);
        let dq = synth_image(-0.5, 0.8, 0.5, 32);
        let a = t.transform(&sp, &dq).unwrap();
        let b = t.transform(&sp, &dq).unwrap();
        assert_eq!(a.resolution(), 32);
        assert_eq!(a.pixels, b.pixels);
    }

    #[test]
    fn transform_resolution_mismatch_errors() {
        let t = LandmarkTransformer::new(tiny_cfg(), 32, 5).unwrap();
        let sp = random_landmark_image(32, 1);
        let dq = random_landmark_image(16, 2);
        assert!(matches!(t.transform(&sp, &dq), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn rec_and_cycle_vanish_for_zero_init_and_oracle() {
        let t = LandmarkTransformer::new(tiny_cfg(), 32, 6).unwrap();
        let sp = synth_image(0.3, 0.1, 0.0, 32);
        let sq = synth_image(0.3, 0.9, 0.5, 32);
        let dq = synth_image(-0.4, 0.9, 0.5, 32);
        let dp = synth_image(-0.4, 0.1, 0.0, 32);
        assert_eq!(loss_rec(&t, &sp, &sq).unwrap(), 0.0);
        assert_eq!(loss_cycle(&t, &sp, &dq, &dp).unwrap(), 0.0);

        // Oracle transformer: returns the ground-truth landmark image for
        // (source identity, driving motion). On same-identity pairs that is
        // the driving input itself.
        let oracle = |_sp: &LandmarkImage, drv: &LandmarkImage| Ok(drv.clone());
        assert_eq!(loss_rec_fn(oracle, &sp, &sq).unwrap(), 0.0);
        assert_eq!(loss_cycle_fn(oracle, &sp, &dq, &dp).unwrap(), 0.0);
    }

    #[test]
    fn stub_transformer_closed_forms() {
        // Stub adding 0.1 everywhere (inputs <= 0.9, no clamping active).
        let stub = |_: &LandmarkImage, drv: &LandmarkImage| {
            Ok(LandmarkImage::new(drv.pixels.mapv(|v| v + 0.1)))
        };
        let base = LandmarkImage::new(Array2::from_elem((32, 32), 0.4));
        let sq = base.clone();
        let rec = loss_rec_fn(stub, &base, &sq).unwrap();
        assert!((rec - 0.1).abs() < 1e-12);

        // Two-hop stub adds 0.1 twice: cycle = 2 * mean|delta|.
        let dq = LandmarkImage::new(Array2::from_elem((32, 32), 0.3));
        let cyc = loss_cycle_fn(stub, &base, &dq, &base).unwrap();
        assert!((cyc - 0.2).abs() < 1e-12);
    }

    #[test]
    fn loss_id_identity_and_symmetry() {
        let c = IdentityClassifier::new(tiny_disc_cfg(), 32, 8, 4, 7).unwrap();
        let a = synth_image(0.2, 0.5, 0.0, 32);
        let b = synth_image(-0.7, 0.1, 0.5, 32);
        assert_eq!(loss_id(&c, &a, &a).unwrap(), 0.0);
        let ab = loss_id(&c, &a, &b).unwrap();
        let ba = loss_id(&c, &b, &a).unwrap();
        assert_eq!(ab, ba);
        assert!(ab > 0.0);

        // Brute-force mean|f1-f2| against the reported loss.
        let (_, fa) = c.classify_identity(&a).unwrap();
        let (_, fb) = c.classify_identity(&b).unwrap();
        let brute: f64 =
            fa.iter().zip(fb.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() / fa.len() as f64;
        assert!((ab - brute).abs() < 1e-12);
    }

    #[test]
    fn classifier_is_deterministic() {
        let c = IdentityClassifier::new(tiny_disc_cfg(), 32, 8, 4, 8).unwrap();
        let a = synth_image(0.2, 0.5, 0.0, 32);
        let (l1_, f1) = c.classify_identity(&a).unwrap();
        let (l2, f2) = c.classify_identity(&a).unwrap();
        assert_eq!(l1_, l2);
        assert_eq!(f1, f2);
        assert_eq!(l1_.len(), 4);
        assert_eq!(f1.len(), 8);
    }

    #[test]
    fn zero_weights_leave_transformer_unchanged() {
        let mut tr =
            TransformerTrainer::new(tiny_cfg(), tiny_disc_cfg(), 32, 8, 4, 9).unwrap();
        let before: Vec<ArrayD<f64>> =
            tr.net.params().iter().map(|(_, p)| (*p).clone()).collect();
        let batch = TransformerBatch {
            l_sp: stack_landmark_images(&[&synth_image(0.1, 0.2, 0.0, 32)]).unwrap(),
            l_dq: stack_landmark_images(&[&synth_image(-0.6, 0.8, 0.5, 32)]).unwrap(),
            l_sq: stack_landmark_images(&[&synth_image(0.1, 0.8, 0.5, 32)]).unwrap(),
            l_dp: stack_landmark_images(&[&synth_image(-0.6, 0.2, 0.0, 32)]).unwrap(),
            src_labels: vec![0],
            drv_labels: vec![1],
        };
        let w = TransformerWeights { l1: 0.0, rec: 0.0, cycle: 0.0, id: 0.0, adv: 0.0 };
        tr.train_step(&batch, &w, 1e-3).unwrap();
        for ((_, after), b) in tr.net.params().iter().zip(&before) {
            assert_eq!(*after, b);
        }
    }

    #[test]
    fn report_total_is_weighted_sum_of_terms() {
        let mut tr =
            TransformerTrainer::new(tiny_cfg(), tiny_disc_cfg(), 32, 8, 4, 10).unwrap();
        let batch = TransformerBatch {
            l_sp: stack_landmark_images(&[&synth_image(0.1, 0.2, 0.0, 32)]).unwrap(),
            l_dq: stack_landmark_images(&[&synth_image(-0.6, 0.8, 0.5, 32)]).unwrap(),
            l_sq: stack_landmark_images(&[&synth_image(0.1, 0.8, 0.5, 32)]).unwrap(),
            l_dp: stack_landmark_images(&[&synth_image(-0.6, 0.2, 0.0, 32)]).unwrap(),
            src_labels: vec![0],
            drv_labels: vec![1],
        };
        let w = TransformerWeights { l1: 2.0, rec: 3.0, cycle: 0.5, id: 1.5, adv: 0.25 };
        let r = tr.train_step(&batch, &w, 1e-4).unwrap();
        let hand =
            w.l1 * r.l1 + w.rec * r.rec + w.cycle * r.cycle + w.id * r.id + w.adv * r.adv_g;
        assert!((r.total - hand).abs() < 1e-6, "total {} vs {}", r.total, hand);
    }

    #[test]
    fn scaling_all_weights_scales_total_linearly() {
        let batch = TransformerBatch {
            l_sp: stack_landmark_images(&[&synth_image(0.1, 0.2, 0.0, 32)]).unwrap(),
            l_dq: stack_landmark_images(&[&synth_image(-0.6, 0.8, 0.5, 32)]).unwrap(),
            l_sq: stack_landmark_images(&[&synth_image(0.1, 0.8, 0.5, 32)]).unwrap(),
            l_dp: stack_landmark_images(&[&synth_image(-0.6, 0.2, 0.0, 32)]).unwrap(),
            src_labels: vec![0],
            drv_labels: vec![1],
        };
        let w1 = TransformerWeights { l1: 1.0, rec: 2.0, cycle: 3.0, id: 0.5, adv: 0.1 };
        let w3 = TransformerWeights {
            l1: 3.0 * w1.l1,
            rec: 3.0 * w1.rec,
            cycle: 3.0 * w1.cycle,
            id: 3.0 * w1.id,
            adv: 3.0 * w1.adv,
        };
        // Two identical trainers, zero lr so parameters stay fixed.
        let mut a = TransformerTrainer::new(tiny_cfg(), tiny_disc_cfg(), 32, 8, 4, 11).unwrap();
        let mut b = TransformerTrainer::new(tiny_cfg(), tiny_disc_cfg(), 32, 8, 4, 11).unwrap();
        let ra = a.train_step(&batch, &w1, 0.0).unwrap();
        let rb = b.train_step(&batch, &w3, 0.0).unwrap();
        assert!((rb.total - 3.0 * ra.total).abs() < 1e-9);
    }
}
