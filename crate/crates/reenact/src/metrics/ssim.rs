//! Structural similarity (SSIM) with a sliding Gaussian window.
//!
//! Standard constants: 11-tap window, sigma 1.5, k1 = 0.01, k2 = 0.03,
//! dynamic range 1.0. Color images are converted to Rec. 601 luma first.
//! The local map is computed over valid window positions only (no padding)
//! and averaged.

use crate::error::{Error, Result};
use crate::img::FaceImage;
use ndarray::Array2;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut k: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    for v in &mut k {
        *v /= s;
    }
    k
}

/// Separable valid-mode Gaussian filter.
fn filter_valid(img: &Array2<f64>, kernel: &[f64]) -> Array2<f64> {
    let (h, w) = img.dim();
    let k = kernel.len();
    let mut rows = Array2::<f64>::zeros((h, w - k + 1));
    for y in 0..h {
        for x in 0..w - k + 1 {
            let mut acc = 0.0;
            for i in 0..k {
                acc += img[[y, x + i]] * kernel[i];
            }
            rows[[y, x]] = acc;
        }
    }
    let mut out = Array2::<f64>::zeros((h - k + 1, w - k + 1));
    for y in 0..h - k + 1 {
        for x in 0..w - k + 1 {
            let mut acc = 0.0;
            for i in 0..k {
                acc += rows[[y + i, x]] * kernel[i];
            }
            out[[y, x]] = acc;
        }
    }
    out
}

/// SSIM of two grayscale images in [0,1].
pub fn ssim_gray(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch(format!(
            "ssim: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let (h, w) = a.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::WindowTooLarge(format!(
            "image {h}x{w} smaller than {SSIM_WINDOW}-tap window"
        )));
    }
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let kernel = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);

    let mu1 = filter_valid(a, &kernel);
    let mu2 = filter_valid(b, &kernel);
    let aa = filter_valid(&(a * a), &kernel);
    let bb = filter_valid(&(b * b), &kernel);
    let ab = filter_valid(&(a * b), &kernel);

    let mut total = 0.0;
    let (oh, ow) = mu1.dim();
    for y in 0..oh {
        for x in 0..ow {
            let m1 = mu1[[y, x]];
            let m2 = mu2[[y, x]];
            let v1 = aa[[y, x]] - m1 * m1;
            let v2 = bb[[y, x]] - m2 * m2;
            let cov = ab[[y, x]] - m1 * m2;
            let num = (2.0 * m1 * m2 + c1) * (2.0 * cov + c2);
            let den = (m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2);
            total += num / den;
        }
    }
    Ok(total / (oh * ow) as f64)
}

/// SSIM of two color faces, computed on their luma.
pub fn ssim(a: &FaceImage, b: &FaceImage) -> Result<f64> {
    ssim_gray(&a.to_gray(), &b.to_gray())
}
