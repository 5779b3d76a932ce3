//! Face rotation stage: turns the source face to the driving pose.
//!
//! The rotator conditions on a pose feature extracted from a landmark image.
//! Training uses the pose-reference augmentation: the conditioning landmark
//! is sampled among all same-identity, same-pose landmarks regardless of
//! expression, because the face contour carries the pose. Losses: pixel
//! difference against the ground-truth rotated face, least-squares
//! adversarial realness, and a pose-regression loss from a dedicated pose
//! discriminator that consumes face images.

use crate::autodiff::{Graph, NodeId};
use crate::dataset::LoadedDataset;
use crate::error::{Error, Result};
use crate::img::{FaceImage, LandmarkImage};
use crate::nn::adam::{Adam, GAN_BETAS};
use crate::nn::blocks::{Act, BlockConfig, Decoder, Encoder, Head, PatchDiscriminator};
use crate::nn::losses::{l1_node, lsgan_d_loss, lsgan_g_loss, mse_node};
use crate::nn::{nest, nest_mut, seeded_rng, Linear, Module, ParamTape};
use ndarray::{ArrayD, IxDyn};
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

/// Stack RGB faces into an (N,3,H,W) batch tensor.
pub fn stack_face_images(images: &[&FaceImage]) -> Result<ArrayD<f64>> {
    let first = images
        .first()
        .ok_or_else(|| Error::ShapeMismatch("empty face batch".into()))?;
    let (h, w) = (first.height(), first.width());
    let mut out = ArrayD::zeros(IxDyn(&[images.len(), 3, h, w]));
    for (n, img) in images.iter().enumerate() {
        if img.height() != h || img.width() != w {
            return Err(Error::ShapeMismatch("face batch mixes sizes".into()));
        }
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    out[[n, c, y, x]] = img.data[[y, x, c]];
                }
            }
        }
    }
    Ok(out)
}

/// Uniformly pick one same-identity, same-pose landmark record, any
/// expression. Deterministic given the RNG state.
pub fn sample_pose_reference(
    ds: &LoadedDataset,
    identity: usize,
    pose: usize,
    rng: &mut ChaCha20Rng,
) -> Result<usize> {
    let candidates = ds.pose_reference_candidates(identity, pose);
    if candidates.is_empty() {
        return Err(Error::NoPoseReference(format!(
            "identity {identity}, pose {pose}"
        )));
    }
    Ok(candidates[rng.random_range(0..candidates.len())])
}

/// Rotation network R: face encoder, pose encoder producing a pose feature
/// vector from a landmark image, and a decoder emitting the rotated face.
pub struct FaceRotator {
    pub face_enc: Encoder,
    pub pose_enc: Encoder,
    pub pose_head: Linear,
    pub merge: crate::nn::Conv2d,
    pub dec: Decoder,
    pub pose_dim: usize,
    pub resolution: usize,
}

impl FaceRotator {
    pub fn new(cfg: BlockConfig, resolution: usize, pose_dim: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed, "rotator");
        let face_enc = Encoder::build(cfg, 3, resolution, Act::Silu, &mut rng)?;
        let pose_enc = Encoder::build(cfg, 1, resolution, Act::Silu, &mut rng)?;
        let pose_head = Linear::new(pose_enc.out_channels(), pose_dim, &mut rng);
        let c = face_enc.out_channels();
        let merge = crate::nn::Conv2d::new(c + pose_dim, c, 3, 1, 1, &mut rng);
        let dec = Decoder::build(cfg, c, 3, Head::Sigmoid, Act::Silu, &mut rng)?;
        Ok(Self { face_enc, pose_enc, pose_head, merge, dec, pose_dim, resolution })
    }

    /// Pose feature vector (N, pose_dim) from a landmark image batch.
    pub fn pose_feature_node(&self, g: &mut Graph, tp: &mut ParamTape, l: NodeId) -> NodeId {
        let h = self.pose_enc.fwd(g, tp, l);
        let pooled = g.global_avg_pool(h);
        let f = self.pose_head.fwd(g, tp, pooled);
        g.silu(f)
    }

    pub fn rotate_node(
        &self,
        g: &mut Graph,
        tp: &mut ParamTape,
        face: NodeId,
        pose_ref: NodeId,
    ) -> NodeId {
        let fb = self.face_enc.fwd(g, tp, face);
        let pv = self.pose_feature_node(g, tp, pose_ref);
        let shape = g.shape(fb).to_vec();
        let (n, h, w) = (shape[0], shape[2], shape[3]);
        let pv = g.reshape(pv, &[n, self.pose_dim, 1, 1]);
        let ones = g.constant(ArrayD::from_elem(IxDyn(&[n, self.pose_dim, h, w]), 1.0));
        let pmap = g.mul(pv, ones);
        let z = g.concat(&[fb, pmap], 1);
        let merged = self.merge.fwd(g, tp, z);
        let merged = g.silu(merged);
        self.dec.fwd(g, tp, merged)
    }

    /// Rotate a source face to the pose shown in the reference landmark image.
    pub fn rotate(&self, i_sp: &FaceImage, pose_ref: &LandmarkImage) -> Result<FaceImage> {
        if i_sp.height() != pose_ref.resolution() || i_sp.width() != pose_ref.resolution() {
            return Err(Error::ShapeMismatch(format!(
                "rotate: face {}x{} vs landmark {}",
                i_sp.height(),
                i_sp.width(),
                pose_ref.resolution()
            )));
        }
        let mut g = Graph::new();
        let f = g.constant(stack_face_images(&[i_sp])?);
        let l = g.constant(pose_ref.to_chw().into_shape_with_order(IxDyn(&[1, 1, pose_ref.resolution(), pose_ref.resolution()])).unwrap());
        let mut tp = ParamTape::frozen();
        let out = self.rotate_node(&mut g, &mut tp, f, l);
        FaceImage::from_chw(&g.value(out).index_axis(ndarray::Axis(0), 0))
    }
}

impl Module for FaceRotator {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)> {
        let mut out = nest("face_enc", self.face_enc.params());
        out.extend(nest("pose_enc", self.pose_enc.params()));
        out.extend(nest("pose_head", self.pose_head.params()));
        out.extend(nest("merge", self.merge.params()));
        out.extend(nest("dec", self.dec.params()));
        out
    }
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)> {
        let mut out = nest_mut("face_enc", self.face_enc.params_mut());
        out.extend(nest_mut("pose_enc", self.pose_enc.params_mut()));
        out.extend(nest_mut("pose_head", self.pose_head.params_mut()));
        out.extend(nest_mut("merge", self.merge.params_mut()));
        out.extend(nest_mut("dec", self.dec.params_mut()));
        out
    }
}

/// Pose discriminator: regresses the yaw scalar of a face image through a
/// tanh head, so predictions stay in [-1, 1].
pub struct PoseDiscriminator {
    pub enc: Encoder,
    pub head: Linear,
}

impl PoseDiscriminator {
    pub fn new(cfg: BlockConfig, resolution: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed, "pose-disc");
        let enc = Encoder::build(cfg, 3, resolution, Act::LeakyRelu, &mut rng)?;
        let head = Linear::new(enc.out_channels(), 1, &mut rng);
        Ok(Self { enc, head })
    }

    /// (N,1) pose predictions in [-1,1].
    pub fn predict_node(&self, g: &mut Graph, tp: &mut ParamTape, face: NodeId) -> NodeId {
        let h = self.enc.fwd(g, tp, face);
        let pooled = g.global_avg_pool(h);
        let p = self.head.fwd(g, tp, pooled);
        g.tanh_(p)
    }

    pub fn predict_pose(&self, face: &FaceImage) -> Result<f64> {
        let mut g = Graph::new();
        let f = g.constant(stack_face_images(&[face])?);
        let mut tp = ParamTape::frozen();
        let p = self.predict_node(&mut g, &mut tp, f);
        Ok(g.scalar(p))
    }
}

impl Module for PoseDiscriminator {
    fn params(&self) -> Vec<(String, &ArrayD<f64>)> {
        let mut out = nest("enc", self.enc.params());
        out.extend(nest("head", self.head.params()));
        out
    }
    fn params_mut(&mut self) -> Vec<(String, &mut ArrayD<f64>)> {
        let mut out = nest_mut("enc", self.enc.params_mut());
        out.extend(nest_mut("head", self.head.params_mut()));
        out
    }
}

// ---------------------------------------------------------------------------
// Value-level losses
// ---------------------------------------------------------------------------

/// Mean absolute pixel difference between rotated output and ground truth.
pub fn loss_diff(pred: &FaceImage, gt: &FaceImage) -> Result<f64> {
    pred.l1(gt)
}

/// Least-squares adversarial pair on face batches: (d_loss, g_loss).
/// Real targets 1 for the discriminator, fake targets 1 for the generator.
pub fn loss_lsgan(
    d: &PatchDiscriminator,
    real: &ArrayD<f64>,
    fake: &ArrayD<f64>,
) -> Result<(f64, f64)> {
    if real.shape() != fake.shape() {
        return Err(Error::ShapeMismatch(format!(
            "loss_lsgan: {:?} vs {:?}",
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
    let dl = lsgan_d_loss(&mut g, dr, df);
    let gl = lsgan_g_loss(&mut g, df);
    Ok((g.scalar(dl), g.scalar(gl)))
}

/// Squared pose-regression error of predictions against targets.
/// This is the arithmetic shared by both halves of the pose pair.
pub fn pose_mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::ShapeMismatch("pose_mse: length mismatch".into()));
    }
    for &p in targets {
        if !(-1.0..=1.0).contains(&p) {
            return Err(Error::PoseOutOfRange(p));
        }
    }
    Ok(predictions
        .iter()
        .zip(targets)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / predictions.len() as f64)
}

/// Pose-prediction pair of Eq-style losses: (dp_loss, pose_loss).
/// `dp_loss` trains the pose discriminator on real faces carrying pose `p`;
/// `pose_loss` scores the generated face against the same target.
pub fn loss_pose_pair(
    dp: &PoseDiscriminator,
    real: &FaceImage,
    fake: &FaceImage,
    p: f64,
) -> Result<(f64, f64)> {
    if !(-1.0..=1.0).contains(&p) {
        return Err(Error::PoseOutOfRange(p));
    }
    let dp_loss = pose_mse(&[dp.predict_pose(real)?], &[p])?;
    let pose_loss = pose_mse(&[dp.predict_pose(fake)?], &[p])?;
    Ok((dp_loss, pose_loss))
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct RotationWeights {
    pub diff: f64,
    pub gan: f64,
    pub pose: f64,
}

impl Default for RotationWeights {
    fn default() -> Self {
        Self { diff: 10.0, gan: 0.25, pose: 1.0 }
    }
}

/// One rotation batch: source faces, augmented pose references, ground-truth
/// rotated faces, and the driving pose scalar per sample.
pub struct RotationBatch {
    pub src_face: ArrayD<f64>,
    pub pose_ref: ArrayD<f64>,
    pub target_face: ArrayD<f64>,
    pub pose: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct RotationLossReport {
    pub diff: f64,
    pub adv_g: f64,
    pub pose: f64,
    pub total: f64,
    pub d_loss: f64,
    pub dp_loss: f64,
}

pub struct RotationTrainer {
    pub net: FaceRotator,
    pub disc: PatchDiscriminator,
    pub pose_disc: PoseDiscriminator,
    pub opt_net: Adam,
    pub opt_disc: Adam,
    pub opt_pose: Adam,
}

impl RotationTrainer {
    pub fn new(
        cfg: BlockConfig,
        disc_cfg: BlockConfig,
        resolution: usize,
        pose_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        let net = FaceRotator::new(cfg, resolution, pose_dim, seed)?;
        let mut rng = seeded_rng(seed, "rotator-disc");
        let disc = PatchDiscriminator::build(disc_cfg, 3, resolution, false, &mut rng)?;
        let pose_disc = PoseDiscriminator::new(disc_cfg, resolution, seed)?;
        let opt_net = Adam::new(&net.params(), GAN_BETAS);
        let opt_disc = Adam::new(&disc.params(), GAN_BETAS);
        let opt_pose = Adam::new(&pose_disc.params(), GAN_BETAS);
        Ok(Self { net, disc, pose_disc, opt_net, opt_disc, opt_pose })
    }

    /// One step for R, one for the LSGAN discriminator, one for the pose
    /// discriminator.
    pub fn train_step(
        &mut self,
        batch: &RotationBatch,
        w: &RotationWeights,
        lr: f64,
    ) -> Result<RotationLossReport> {
        let n = batch.src_face.shape()[0];
        if batch.pose.len() != n {
            return Err(Error::ShapeMismatch("pose count vs batch".into()));
        }
        for &p in &batch.pose {
            if !(-1.0..=1.0).contains(&p) {
                return Err(Error::PoseOutOfRange(p));
            }
        }
        let mut report = RotationLossReport::default();
        let pose_targets =
            ArrayD::from_shape_vec(IxDyn(&[n, 1]), batch.pose.clone()).unwrap();

        // Pose discriminator on real faces carrying their pose.
        {
            let mut g = Graph::new();
            let real = g.constant(batch.target_face.clone());
            let t = g.constant(pose_targets.clone());
            let mut tp = ParamTape::trainable();
            let pred = self.pose_disc.predict_node(&mut g, &mut tp, real);
            let loss = mse_node(&mut g, pred, t);
            report.dp_loss = g.scalar(loss);
            g.backward(loss);
            let grads = tp.grads(&g, &self.pose_disc.params());
            self.opt_pose.step(&mut self.pose_disc.params_mut(), &grads, lr);
        }

        // LSGAN discriminator against frozen-R fakes.
        {
            let mut g = Graph::new();
            let src = g.constant(batch.src_face.clone());
            let pref = g.constant(batch.pose_ref.clone());
            let real = g.constant(batch.target_face.clone());
            let mut tp_frozen = ParamTape::frozen();
            let fake = self.net.rotate_node(&mut g, &mut tp_frozen, src, pref);
            let mut tp = ParamTape::trainable();
            let dr = self.disc.fwd(&mut g, &mut tp, real);
            let df = self.disc.fwd(&mut g, &mut tp, fake);
            let dl = lsgan_d_loss(&mut g, dr, df);
            report.d_loss = g.scalar(dl);
            g.backward(dl);
            let grads = tp.grads(&g, &self.disc.params());
            self.opt_disc.step(&mut self.disc.params_mut(), &grads, lr);
        }

        // Rotator step: diff + adversarial + pose, discriminators frozen.
        {
            let mut g = Graph::new();
            let src = g.constant(batch.src_face.clone());
            let pref = g.constant(batch.pose_ref.clone());
            let gt = g.constant(batch.target_face.clone());
            let t = g.constant(pose_targets);
            let mut tp = ParamTape::trainable();
            let fake = self.net.rotate_node(&mut g, &mut tp, src, pref);
            let diff = l1_node(&mut g, fake, gt);
            let mut tp_d = ParamTape::frozen();
            let df = self.disc.fwd(&mut g, &mut tp_d, fake);
            let adv_g = lsgan_g_loss(&mut g, df);
            let mut tp_p = ParamTape::frozen();
            let pp = self.pose_disc.predict_node(&mut g, &mut tp_p, fake);
            let pose = mse_node(&mut g, pp, t);

            let wd = g.mul_scalar(diff, w.diff);
            let wa = g.mul_scalar(adv_g, w.gan);
            let wp = g.mul_scalar(pose, w.pose);
            let mut total = g.add(wd, wa);
            total = g.add(total, wp);

            report.diff = g.scalar(diff);
            report.adv_g = g.scalar(adv_g);
            report.pose = g.scalar(pose);
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
    use crate::dataset::generate_synthetic_dataset;
    use crate::dataset::LoadedDataset;
    use crate::landmarks::synth::{render_synthetic_face, SynthFaceParams};
    use crate::nn::blocks::NormKind;

    fn tiny_cfg() -> BlockConfig {
        BlockConfig { stages: 2, base_width: 4, max_width: 16, res_blocks: 0, norm: NormKind::Instance }
    }
    fn tiny_disc() -> BlockConfig {
        BlockConfig { stages: 2, base_width: 4, max_width: 16, res_blocks: 0, norm: NormKind::None }
    }

    fn sample_face(yaw: f64) -> FaceImage {
        let p = SynthFaceParams { identity: [0.2; 6], expression: [0.3, 0.0, 0.0, 0.7], yaw };
        render_synthetic_face(&p, 32).unwrap()
    }

    fn sample_landmark(yaw: f64) -> LandmarkImage {
        let p = SynthFaceParams { identity: [0.2; 6], expression: [0.3, 0.0, 0.0, 0.7], yaw };
        crate::landmarks::raster::render_landmark_image(
            &crate::landmarks::synth::synth_landmarks(&p).unwrap(),
            32,
        )
        .unwrap()
    }

    #[test]
    fn rotate_shape_bounds_determinism() {
        let r = FaceRotator::new(tiny_cfg(), 32, 8, 21).unwrap();
        let face = sample_face(0.0);
        let lref = sample_landmark(0.5);
        let a = r.rotate(&face, &lref).unwrap();
        let b = r.rotate(&face, &lref).unwrap();
        assert_eq!(a.height(), 32);
        assert_eq!(a.width(), 32);
        assert_eq!(a.data, b.data);
        assert!(a.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn pose_predictions_stay_bounded() {
        let dp = PoseDiscriminator::new(tiny_disc(), 32, 22).unwrap();
        for yaw in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let p = dp.predict_pose(&sample_face(yaw)).unwrap();
            assert!(p.abs() <= 1.0);
        }
    }

    #[test]
    fn pose_mse_closed_forms() {
        // An oracle regressor returning exactly p zeroes both halves.
        assert_eq!(pose_mse(&[0.5, -0.25], &[0.5, -0.25]).unwrap(), 0.0);
        // p = 0.5 predicted as 0 costs 0.25.
        assert_eq!(pose_mse(&[0.0], &[0.5]).unwrap(), 0.25);
        assert!(matches!(
            pose_mse(&[0.0], &[1.5]),
            Err(Error::PoseOutOfRange(_))
        ));
    }

    #[test]
    fn loss_pose_pair_rejects_out_of_range() {
        let dp = PoseDiscriminator::new(tiny_disc(), 32, 23).unwrap();
        let f = sample_face(0.0);
        assert!(matches!(
            loss_pose_pair(&dp, &f, &f, 1.2),
            Err(Error::PoseOutOfRange(_))
        ));
    }

    fn small_dataset() -> (tempfile::TempDir, LoadedDataset) {
        let dir = tempfile::tempdir().unwrap();
        let index = generate_synthetic_dataset(2, 8, 3, 32, 31, dir.path(), Some(1)).unwrap();
        let ds = LoadedDataset::load(index, 32).unwrap();
        (dir, ds)
    }

    #[test]
    fn pose_reference_sampling_contract() {
        let (_dir, ds) = small_dataset();
        // Singleton candidate set comes back with probability one.
        let only: Vec<usize> = ds.pose_reference_candidates(0, 0);
        assert_eq!(only.len(), 8);

        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut counts = std::collections::BTreeMap::<usize, u32>::new();
        let mut expr_seen = std::collections::BTreeSet::new();
        for _ in 0..8000 {
            let rec = sample_pose_reference(&ds, 0, 1, &mut rng).unwrap();
            let r = &ds.index.records[rec];
            assert_eq!(r.identity, 0);
            assert_eq!(r.pose, 1);
            expr_seen.insert(r.expression);
            *counts.entry(rec).or_default() += 1;
        }
        // All 8 expressions appear, and each candidate frequency is within
        // 3 sigma of uniform (1000 +- 89).
        assert_eq!(expr_seen.len(), 8);
        for (_, c) in counts {
            assert!((911..=1089).contains(&c), "count {c} outside 3 sigma");
        }

        // Seeded replay reproduces the same sequence.
        let mut r1 = ChaCha20Rng::seed_from_u64(9);
        let mut r2 = ChaCha20Rng::seed_from_u64(9);
        let s1: Vec<usize> =
            (0..50).map(|_| sample_pose_reference(&ds, 1, 2, &mut r1).unwrap()).collect();
        let s2: Vec<usize> =
            (0..50).map(|_| sample_pose_reference(&ds, 1, 2, &mut r2).unwrap()).collect();
        assert_eq!(s1, s2);
    }

    #[test]
    fn empty_candidate_set_errors() {
        let (_dir, ds) = small_dataset();
        assert!(matches!(
            sample_pose_reference(&ds, 0, 99, &mut ChaCha20Rng::seed_from_u64(1)),
            Err(Error::NoPoseReference(_))
        ));
    }

    #[test]
    fn zero_weights_leave_rotator_unchanged_and_total_is_weighted_sum() {
        let mut tr = RotationTrainer::new(tiny_cfg(), tiny_disc(), 32, 8, 24).unwrap();
        let face = sample_face(0.0);
        let gt = sample_face(0.5);
        let lref = sample_landmark(0.5);
        let batch = RotationBatch {
            src_face: stack_face_images(&[&face]).unwrap(),
            pose_ref: stack_landmark(&lref),
            target_face: stack_face_images(&[&gt]).unwrap(),
            pose: vec![0.5],
        };
        let before: Vec<ArrayD<f64>> =
            tr.net.params().iter().map(|(_, p)| (*p).clone()).collect();
        let r0 = tr
            .train_step(&batch, &RotationWeights { diff: 0.0, gan: 0.0, pose: 0.0 }, 1e-3)
            .unwrap();
        assert_eq!(r0.total, 0.0);
        for ((_, after), b) in tr.net.params().iter().zip(&before) {
            assert_eq!(*after, b);
        }

        let w = RotationWeights { diff: 2.0, gan: 0.5, pose: 1.5 };
        let r = tr.train_step(&batch, &w, 1e-4).unwrap();
        let hand = w.diff * r.diff + w.gan * r.adv_g + w.pose * r.pose;
        assert!((r.total - hand).abs() < 1e-6);
    }

    fn stack_landmark(l: &LandmarkImage) -> ArrayD<f64> {
        crate::transformer::stack_landmark_images(&[l]).unwrap()
    }
}
