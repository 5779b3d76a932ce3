//! Adam optimizer with per-parameter first/second moment state.

use ndarray::ArrayD;

/// Conventional GAN betas (0.5, 0.999).
pub const GAN_BETAS: (f64, f64) = (0.5, 0.999);

#[derive(Debug, Clone)]
pub struct Adam {
    pub m: Vec<ArrayD<f64>>,
    pub v: Vec<ArrayD<f64>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(params: &[(String, &ArrayD<f64>)], betas: (f64, f64)) -> Self {
        Self {
            m: params.iter().map(|(_, p)| ArrayD::zeros(p.raw_dim())).collect(),
            v: params.iter().map(|(_, p)| ArrayD::zeros(p.raw_dim())).collect(),
            t: 0,
            beta1: betas.0,
            beta2: betas.1,
            eps: 1e-8,
        }
    }

    /// One update; `params` and `grads` must be in the module's param order.
    pub fn step(&mut self, params: &mut [(String, &mut ArrayD<f64>)], grads: &[ArrayD<f64>], lr: f64) {
        assert_eq!(params.len(), grads.len(), "adam: param/grad count");
        assert_eq!(params.len(), self.m.len(), "adam: state count");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((m, v), ((_, p), g)) in self
            .m
            .iter_mut()
            .zip(self.v.iter_mut())
            .zip(params.iter_mut().zip(grads))
        {
            ndarray::Zip::from(&mut **p)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *p -= lr * mhat / (vhat.sqrt() + self.eps);
                });
        }
    }
}
