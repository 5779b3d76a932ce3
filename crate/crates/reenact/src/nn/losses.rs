//! Loss builders shared across the three stages.
//!
//! All builders return scalar graph nodes so gradients reach whatever
//! produced their inputs. Conventions:
//! - log-loss GAN: discriminator outputs are probabilities, clamped to
//!   [GAN_EPS, 1-GAN_EPS] before the log; the generator gets the
//!   non-saturating term -log D(fake);
//! - least-squares GAN: real -> 1 and fake -> 0 for the discriminator,
//!   fake -> 1 for the generator.

use crate::autodiff::{Graph, NodeId};

/// Probability clamp keeping log-loss terms finite.
pub const GAN_EPS: f64 = 1e-7;

/// Mean absolute difference.
pub fn l1_node(g: &mut Graph, a: NodeId, b: NodeId) -> NodeId {
    let d = g.sub(a, b);
    let d = g.abs(d);
    g.mean_all(d)
}

/// Mean squared difference.
pub fn mse_node(g: &mut Graph, a: NodeId, b: NodeId) -> NodeId {
    let d = g.sub(a, b);
    let d = g.square(d);
    g.mean_all(d)
}

fn clamped_log(g: &mut Graph, x: NodeId) -> NodeId {
    let c = g.clamp(x, GAN_EPS, 1.0 - GAN_EPS);
    g.ln(c)
}

fn clamped_log_one_minus(g: &mut Graph, x: NodeId) -> NodeId {
    let c = g.clamp(x, GAN_EPS, 1.0 - GAN_EPS);
    let n = g.neg(c);
    let om = g.add_scalar(n, 1.0);
    g.ln(om)
}

/// Discriminator log loss: -mean[log D(real) + log(1 - D(fake))].
/// Minimizing it maximizes the usual realness objective.
pub fn gan_d_loss(g: &mut Graph, d_real: NodeId, d_fake: NodeId) -> NodeId {
    let lr = clamped_log(g, d_real);
    let lf = clamped_log_one_minus(g, d_fake);
    let lr = g.mean_all(lr);
    let lf = g.mean_all(lf);
    let s = g.add(lr, lf);
    g.neg(s)
}

/// Non-saturating generator log loss: -mean[log D(fake)].
pub fn gan_g_loss(g: &mut Graph, d_fake: NodeId) -> NodeId {
    let lf = clamped_log(g, d_fake);
    let m = g.mean_all(lf);
    g.neg(m)
}

/// LSGAN discriminator loss: mean[(D(real)-1)^2] + mean[D(fake)^2].
pub fn lsgan_d_loss(g: &mut Graph, d_real: NodeId, d_fake: NodeId) -> NodeId {
    let r = g.add_scalar(d_real, -1.0);
    let r = g.square(r);
    let r = g.mean_all(r);
    let f = g.square(d_fake);
    let f = g.mean_all(f);
    g.add(r, f)
}

/// LSGAN generator loss: mean[(D(fake)-1)^2].
pub fn lsgan_g_loss(g: &mut Graph, d_fake: NodeId) -> NodeId {
    let f = g.add_scalar(d_fake, -1.0);
    let f = g.square(f);
    g.mean_all(f)
}

/// Squared pose regression error: mean[(pred - target)^2].
pub fn pose_loss(g: &mut Graph, pred: NodeId, target: NodeId) -> NodeId {
    mse_node(g, pred, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayD, IxDyn};

    fn scalar_field(g: &mut Graph, v: f64) -> NodeId {
        g.constant(ArrayD::from_elem(IxDyn(&[2, 1, 4, 4]), v))
    }

    #[test]
    fn perfect_discriminator_log_loss_vanishes() {
        let mut g = Graph::new();
        let real = scalar_field(&mut g, 1.0 - GAN_EPS);
        let fake = scalar_field(&mut g, GAN_EPS);
        let d = gan_d_loss(&mut g, real, fake);
        assert!(g.scalar(d).abs() <= 1e-6, "d_loss {}", g.scalar(d));
    }

    #[test]
    fn uninformative_discriminator_gives_two_ln_two() {
        let mut g = Graph::new();
        let real = scalar_field(&mut g, 0.5);
        let fake = scalar_field(&mut g, 0.5);
        let d = gan_d_loss(&mut g, real, fake);
        assert!((g.scalar(d) - 2.0 * std::f64::consts::LN_2).abs() < 1e-6);
        let gl = gan_g_loss(&mut g, fake);
        assert!((g.scalar(gl) - std::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn lsgan_closed_forms() {
        let mut g = Graph::new();
        let real = scalar_field(&mut g, 1.0);
        let fake = scalar_field(&mut g, 0.0);
        let d = lsgan_d_loss(&mut g, real, fake);
        assert_eq!(g.scalar(d), 0.0);

        let half_r = scalar_field(&mut g, 0.5);
        let half_f = scalar_field(&mut g, 0.5);
        let d = lsgan_d_loss(&mut g, half_r, half_f);
        assert!((g.scalar(d) - 0.5).abs() < 1e-12);

        let ones = scalar_field(&mut g, 1.0);
        let gl = lsgan_g_loss(&mut g, ones);
        assert_eq!(g.scalar(gl), 0.0);
    }

    #[test]
    fn lsgan_losses_nonnegative_on_random_outputs() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(77);
        for _ in 0..50 {
            let mut g = Graph::new();
            let mk = |g: &mut Graph, rng: &mut rand_chacha::ChaCha20Rng| {
                let data: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..3.0)).collect();
                g.constant(ArrayD::from_shape_vec(IxDyn(&[1, 1, 4, 4]), data).unwrap())
            };
            let r = mk(&mut g, &mut rng);
            let f = mk(&mut g, &mut rng);
            let d = lsgan_d_loss(&mut g, r, f);
            let gl = lsgan_g_loss(&mut g, f);
            assert!(g.scalar(d) >= 0.0);
            assert!(g.scalar(gl) >= 0.0);
        }
    }

    #[test]
    fn cross_entropy_of_uniform_logits_is_ln_n() {
        let mut g = Graph::new();
        let logits = g.constant(ArrayD::zeros(IxDyn(&[4, 8])));
        let ce = g.cross_entropy(logits, &[0, 3, 5, 7]);
        assert!((g.scalar(ce) - (8.0f64).ln()).abs() < 1e-12);
        assert!((g.scalar(ce) - 2.0794).abs() < 1e-4);
    }
}
