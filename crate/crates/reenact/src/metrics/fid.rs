//! Fréchet distance between Gaussian fits of image feature distributions.
//!
//! FID = ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}), evaluated through
//! the symmetric form (S1^{1/2} S2 S1^{1/2})^{1/2} so a plain symmetric
//! eigendecomposition (cyclic Jacobi) suffices. Eigenvalues are clipped at a
//! -1e-8 tolerance; anything more negative is a numerical failure.
//!
//! The feature extractor is a fixed seeded convolution stack with a 64-dim
//! head, so absolute values are not comparable to published FID numbers;
//! identities (FID(X, X) = 0) and orderings are meaningful.

use crate::autodiff::conv2d_forward;
use crate::error::{Error, Result};
use crate::img::FaceImage;
use crate::nn::seeded_rng;
use ndarray::{Array1, Array2, ArrayD, IxDyn};
use rand::prelude::*;

pub const NEG_EIGENVALUE_TOL: f64 = -1e-8;

/// Gaussian summary of an image feature set.
#[derive(Debug, Clone)]
pub struct FeatureStats {
    pub mean: Array1<f64>,
    /// Symmetric positive semidefinite covariance (symmetrized estimate).
    pub cov: Array2<f64>,
}

impl FeatureStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and covariance (ddof = 1) of feature rows, symmetrized.
pub fn feature_stats(features: &Array2<f64>) -> Result<FeatureStats> {
    let (n, f) = features.dim();
    if n < 2 {
        return Err(Error::Feature(format!(
            "need at least 2 samples for covariance, got {n}"
        )));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Feature("non-finite feature values".into()));
    }
    let mean = features.sum_axis(ndarray::Axis(0)) / n as f64;
    let mut cov = Array2::<f64>::zeros((f, f));
    for row in features.rows() {
        let d = &row.to_owned() - &mean;
        for i in 0..f {
            for j in 0..f {
                cov[[i, j]] += d[i] * d[j];
            }
        }
    }
    cov /= (n - 1) as f64;
    let cov = (&cov + &cov.t()) / 2.0;
    Ok(FeatureStats { mean, cov })
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns (eigenvalues, eigenvectors as columns).
fn jacobi_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale = a.iter().map(|x| x.abs()).fold(0.0f64, f64::max).max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() < 1e-14 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = Array1::from_iter((0..n).map(|i| m[[i, i]]));
    (eig, v)
}

/// Clip a spectrum at the negative tolerance; beyond it is a failure.
fn clip_spectrum(eig: &Array1<f64>, context: &str) -> Result<Array1<f64>> {
    let mut out = eig.clone();
    for v in out.iter_mut() {
        if *v < NEG_EIGENVALUE_TOL {
            return Err(Error::Numerical(format!(
                "{context}: eigenvalue {v} below tolerance {NEG_EIGENVALUE_TOL}"
            )));
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(out)
}

/// Symmetric PSD matrix square root via eigendecomposition.
fn sqrtm_psd(a: &Array2<f64>, context: &str) -> Result<Array2<f64>> {
    let (eig, v) = jacobi_eigen(a);
    let eig = clip_spectrum(&eig, context)?;
    let sqrt_d = Array2::from_diag(&eig.mapv(f64::sqrt));
    Ok(v.dot(&sqrt_d).dot(&v.t()))
}

/// Squared Fréchet distance between two Gaussian feature summaries.
pub fn frechet_distance(s1: &FeatureStats, s2: &FeatureStats) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(Error::ShapeMismatch(format!(
            "frechet: dim {} vs {}",
            s1.dim(),
            s2.dim()
        )));
    }
    let d = &s1.mean - &s2.mean;
    let mean_term = d.dot(&d);
    let root1 = sqrtm_psd(&s1.cov, "sqrt of first covariance")?;
    let inner = root1.dot(&s2.cov).dot(&root1);
    let inner = (&inner + &inner.t()) / 2.0;
    let (eig, _) = jacobi_eigen(&inner);
    let eig = clip_spectrum(&eig, "sqrt of covariance product")?;
    let tr_sqrt: f64 = eig.mapv(f64::sqrt).sum();
    let tr1: f64 = s1.cov.diag().sum();
    let tr2: f64 = s2.cov.diag().sum();
    Ok(mean_term + tr1 + tr2 - 2.0 * tr_sqrt)
}

/// Fixed seeded convolutional feature extractor used for FID (dim 64).
pub struct FidFeatureExtractor {
    convs: Vec<(ArrayD<f64>, ArrayD<f64>)>, // (weight, bias)
    proj_w: Array2<f64>,
    proj_b: Array1<f64>,
    pub dim: usize,
}

pub const FID_FEATURE_DIM: usize = 64;

impl FidFeatureExtractor {
    pub fn new(seed: u64) -> Self {
        let mut rng = seeded_rng(seed, "fid-extractor");
        let widths = [8usize, 16, 32];
        let mut convs = Vec::new();
        let mut cin = 3usize;
        for &w in &widths {
            let std = (2.0 / (cin * 9) as f64).sqrt();
            let wt = ArrayD::from_shape_fn(IxDyn(&[w, cin, 3, 3]), |_| {
                rng.sample::<f64, _>(rand_distr::StandardNormal) * std
            });
            let b = ArrayD::zeros(IxDyn(&[w]));
            convs.push((wt, b));
            cin = w;
        }
        let proj_w = Array2::from_shape_fn((FID_FEATURE_DIM, cin), |_| {
            rng.sample::<f64, _>(rand_distr::StandardNormal) * (1.0 / (cin as f64).sqrt())
        });
        let proj_b = Array1::zeros(FID_FEATURE_DIM);
        Self { convs, proj_w, proj_b, dim: FID_FEATURE_DIM }
    }

    /// 64-dim feature of one face (resolution independent via global pooling).
    pub fn features(&self, img: &FaceImage) -> Array1<f64> {
        let (h, w) = (img.height(), img.width());
        let mut x = img
            .to_chw()
            .into_shape_with_order(IxDyn(&[1, 3, h, w]))
            .unwrap();
        for (wt, b) in &self.convs {
            x = conv2d_forward(&x, wt, b, 2, 1);
            x.mapv_inplace(|v| v / (1.0 + (-v).exp())); // silu
        }
        let c = x.shape()[1];
        let mut pooled = Array1::<f64>::zeros(c);
        for ci in 0..c {
            pooled[ci] = x.slice(ndarray::s![0, ci, .., ..].as_ref()).mean().unwrap();
        }
        self.proj_w.dot(&pooled) + &self.proj_b
    }

    /// Feature rows for an image set.
    pub fn features_of_set(&self, imgs: &[&FaceImage]) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((imgs.len(), self.dim));
        for (i, img) in imgs.iter().enumerate() {
            out.row_mut(i).assign(&self.features(img));
        }
        out
    }
}

/// Gaussian statistics of an image set under the extractor.
pub fn feature_stats_of(
    images: &[&FaceImage],
    extractor: &FidFeatureExtractor,
) -> Result<FeatureStats> {
    feature_stats(&extractor.features_of_set(images))
}
