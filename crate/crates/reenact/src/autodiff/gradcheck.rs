//! Central finite-difference verification of analytic gradients.

use super::{Graph, NodeId};
use ndarray::ArrayD;

/// Outcome of a finite-difference sweep over every element of every input.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error found, with a unit floor in the denominator:
    /// |analytic - numeric| / max(1, |analytic|, |numeric|).
    pub max_rel_err: f64,
    /// (input index, element index) where the maximum occurred.
    pub worst: (usize, usize),
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Compare analytic gradients of `build` against central finite differences.
///
/// `build` must be a pure function of its inputs: it is re-invoked twice per
/// input element with perturbed values. Keep inputs small.
pub fn gradcheck<F>(build: F, inputs: &[ArrayD<f64>], step: f64) -> GradCheckReport
where
    F: Fn(&mut Graph, &[NodeId]) -> NodeId,
{
    let eval = |xs: &[ArrayD<f64>]| -> f64 {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = xs.iter().map(|x| g.variable(x.clone())).collect();
        let loss = build(&mut g, &ids);
        g.scalar(loss)
    };

    // Analytic pass.
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|x| g.variable(x.clone())).collect();
    let loss = build(&mut g, &ids);
    g.backward(loss);
    let analytic: Vec<ArrayD<f64>> = ids.iter().map(|&id| g.grad_or_zeros(id)).collect();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: (0, 0),
    };
    let mut work: Vec<ArrayD<f64>> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.len() {
            let orig = input.as_slice().unwrap()[j];
            let h = step * orig.abs().max(1.0);
            work[i].as_slice_mut().unwrap()[j] = orig + h;
            let up = eval(&work);
            work[i].as_slice_mut().unwrap()[j] = orig - h;
            let down = eval(&work);
            work[i].as_slice_mut().unwrap()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[i].as_slice().unwrap()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = (i, j);
            }
        }
    }
    report
}

/// Central finite differences of `eval` w.r.t. every parameter element of a
/// module, in `params_mut` order. `eval` must be a pure function of the
/// module's current parameters.
pub fn param_fd_grads<M, F>(module: &mut M, eval: F, step: f64) -> Vec<ArrayD<f64>>
where
    M: crate::nn::Module,
    F: Fn(&M) -> f64,
{
    let n_params = module.params().len();
    let mut grads = Vec::with_capacity(n_params);
    for pi in 0..n_params {
        let shape = module.params()[pi].1.raw_dim();
        let mut g = ArrayD::<f64>::zeros(shape);
        for j in 0..g.len() {
            let orig = module.params()[pi].1.as_slice().unwrap()[j];
            let h = step * orig.abs().max(1.0);
            module.params_mut()[pi].1.as_slice_mut().unwrap()[j] = orig + h;
            let up = eval(module);
            module.params_mut()[pi].1.as_slice_mut().unwrap()[j] = orig - h;
            let down = eval(module);
            module.params_mut()[pi].1.as_slice_mut().unwrap()[j] = orig;
            g.as_slice_mut().unwrap()[j] = (up - down) / (2.0 * h);
        }
        grads.push(g);
    }
    grads
}

/// Worst relative error between two aligned gradient lists, unit-floored.
pub fn max_rel_err(analytic: &[ArrayD<f64>], numeric: &[ArrayD<f64>]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst = 0.0f64;
    for (a, n) in analytic.iter().zip(numeric) {
        assert_eq!(a.shape(), n.shape());
        ndarray::Zip::from(a).and(n).for_each(|&x, &y| {
            let rel = (x - y).abs() / x.abs().max(y.abs()).max(1.0);
            if rel > worst {
                worst = rel;
            }
        });
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayD, IxDyn};
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    fn randn(shape: &[usize], rng: &mut ChaCha20Rng) -> ArrayD<f64> {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
    }

    #[test]
    fn elementwise_chain() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let x = randn(&[3, 4], &mut rng);
        let y = randn(&[3, 4], &mut rng);
        let rep = gradcheck(
            |g, ids| {
                let p = g.mul(ids[0], ids[1]);
                let s = g.silu(p);
                let t = g.tanh_(s);
                let e = g.sub(t, ids[1]);
                let sq = g.square(e);
                g.mean_all(sq)
            },
            &[x, y],
            1e-5,
        );
        assert!(rep.passes(1e-6), "max rel err {}", rep.max_rel_err);
    }

    #[test]
    fn broadcast_ops() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let x = randn(&[2, 3, 4, 4], &mut rng);
        let s = randn(&[2, 3, 1, 1], &mut rng);
        let rep = gradcheck(
            |g, ids| {
                let mu = g.mean_axes(ids[0], &[2, 3]);
                let c = g.sub(ids[0], mu);
                let scaled = g.mul(c, ids[1]);
                let a = g.abs(scaled);
                g.mean_all(a)
            },
            &[x, s],
            1e-5,
        );
        assert!(rep.passes(1e-6), "max rel err {}", rep.max_rel_err);
    }

    #[test]
    fn conv_linear_pool() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let x = randn(&[2, 2, 6, 6], &mut rng);
        let w = randn(&[3, 2, 3, 3], &mut rng) * 0.5;
        let b = randn(&[3], &mut rng);
        let lw = randn(&[4, 3], &mut rng);
        let lb = randn(&[4], &mut rng);
        let rep = gradcheck(
            |g, ids| {
                let c = g.conv2d(ids[0], ids[1], ids[2], 2, 1);
                let a = g.silu(c);
                let u = g.upsample2(a);
                let p = g.avgpool2(u);
                let gp = g.global_avg_pool(p);
                let l = g.linear(gp, ids[3], ids[4]);
                let ce = g.cross_entropy(l, &[1, 3]);
                ce
            },
            &[x, w, b, lw, lb],
            1e-5,
        );
        assert!(rep.passes(1e-6), "max rel err {}", rep.max_rel_err);
    }

    #[test]
    fn concat_and_reshape() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let a = randn(&[1, 2, 4, 4], &mut rng);
        let b = randn(&[1, 3, 4, 4], &mut rng);
        let rep = gradcheck(
            |g, ids| {
                let cat = g.concat(&[ids[0], ids[1]], 1);
                let r = g.reshape(cat, &[1, 5 * 16]);
                let sq = g.square(r);
                g.sum_all(sq)
            },
            &[a, b],
            1e-5,
        );
        assert!(rep.passes(1e-6), "max rel err {}", rep.max_rel_err);
    }
}
