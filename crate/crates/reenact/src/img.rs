//! Image containers and pixel-space distances.
//!
//! Faces are (H, W, 3) arrays in [0,1]; landmark images are square
//! single-channel arrays in [0,1]. Both convert to and from the NCHW f64
//! tensors used by the networks.

use crate::error::{Error, Result};
use ndarray::{Array2, Array3, ArrayD, ArrayViewD, IxDyn};
use std::path::Path;

/// H x W x 3 image with values in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct FaceImage {
    pub data: Array3<f64>,
}

impl FaceImage {
    pub fn new(data: Array3<f64>) -> Self {
        debug_assert_eq!(data.shape()[2], 3);
        Self { data }
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        let mut data = Array3::zeros((height, width, 3));
        for c in 0..3 {
            data.slice_mut(ndarray::s![.., .., c]).fill(rgb[c]);
        }
        Self { data }
    }

    pub fn height(&self) -> usize {
        self.data.shape()[0]
    }
    pub fn width(&self) -> usize {
        self.data.shape()[1]
    }

    /// (3, H, W) tensor for network input.
    pub fn to_chw(&self) -> ArrayD<f64> {
        let (h, w) = (self.height(), self.width());
        let mut out = ArrayD::zeros(IxDyn(&[3, h, w]));
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    out[[c, y, x]] = self.data[[y, x, c]];
                }
            }
        }
        out
    }

    /// Rebuild from a (3, H, W) tensor, clamping into [0,1].
    pub fn from_chw(t: &ArrayViewD<f64>) -> Result<Self> {
        let s = t.shape();
        if s.len() != 3 || s[0] != 3 {
            return Err(Error::ShapeMismatch(format!(
                "expected (3,H,W) tensor, got {s:?}"
            )));
        }
        let (h, w) = (s[1], s[2]);
        let mut data = Array3::zeros((h, w, 3));
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    data[[y, x, c]] = t[[c, y, x]].clamp(0.0, 1.0);
                }
            }
        }
        Ok(Self { data })
    }

    /// Rec. 601 luma: 0.299 R + 0.587 G + 0.114 B.
    pub fn to_gray(&self) -> Array2<f64> {
        let (h, w) = (self.height(), self.width());
        Array2::from_shape_fn((h, w), |(y, x)| {
            0.299 * self.data[[y, x, 0]] + 0.587 * self.data[[y, x, 1]] + 0.114 * self.data[[y, x, 2]]
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let (h, w) = (self.height(), self.width());
        let mut buf = image::RgbImage::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                let px = [
                    quantize(self.data[[y, x, 0]]),
                    quantize(self.data[[y, x, 1]]),
                    quantize(self.data[[y, x, 2]]),
                ];
                buf.put_pixel(x as u32, y as u32, image::Rgb(px));
            }
        }
        buf.save(path)
            .map_err(|e| Error::Ingest(format!("writing {}: {e}", path.display())))
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| Error::Ingest(format!("reading {}: {e}", path.display())))?
            .to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut data = Array3::zeros((h, w, 3));
        for y in 0..h {
            for x in 0..w {
                let px = img.get_pixel(x as u32, y as u32);
                for c in 0..3 {
                    data[[y, x, c]] = px.0[c] as f64 / 255.0;
                }
            }
        }
        Ok(Self { data })
    }

    pub fn l1(&self, other: &FaceImage) -> Result<f64> {
        image_l1(&self.data.view().into_dyn(), &other.data.view().into_dyn())
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Square single-channel rasterized landmark drawing, values in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkImage {
    pub pixels: Array2<f64>,
}

impl LandmarkImage {
    pub fn new(pixels: Array2<f64>) -> Self {
        debug_assert_eq!(pixels.nrows(), pixels.ncols());
        Self { pixels }
    }

    pub fn resolution(&self) -> usize {
        self.pixels.nrows()
    }

    /// (1, R, R) tensor for network input.
    pub fn to_chw(&self) -> ArrayD<f64> {
        let r = self.resolution();
        self.pixels
            .clone()
            .into_shape_with_order(IxDyn(&[1, r, r]))
            .unwrap()
    }

    pub fn from_chw(t: &ArrayViewD<f64>) -> Result<Self> {
        let s = t.shape();
        if s.len() != 3 || s[0] != 1 || s[1] != s[2] {
            return Err(Error::ShapeMismatch(format!(
                "expected (1,R,R) tensor, got {s:?}"
            )));
        }
        let pixels = Array2::from_shape_fn((s[1], s[2]), |(y, x)| t[[0, y, x]].clamp(0.0, 1.0));
        Ok(Self { pixels })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let r = self.resolution();
        let mut buf = image::GrayImage::new(r as u32, r as u32);
        for y in 0..r {
            for x in 0..r {
                buf.put_pixel(x as u32, y as u32, image::Luma([quantize(self.pixels[[y, x]])]));
            }
        }
        buf.save(path)
            .map_err(|e| Error::Ingest(format!("writing {}: {e}", path.display())))
    }

    pub fn l1(&self, other: &LandmarkImage) -> Result<f64> {
        image_l1(
            &self.pixels.view().into_dyn(),
            &other.pixels.view().into_dyn(),
        )
    }
}

/// Mean absolute pixel difference between two same-shape arrays.
pub fn image_l1(a: &ArrayViewD<f64>, b: &ArrayViewD<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "image_l1: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut total = 0.0;
    ndarray::Zip::from(a).and(b).for_each(|&x, &y| total += (x - y).abs());
    Ok(total / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn l1_identity_is_zero() {
        let img = FaceImage::filled(8, 8, [0.3, 0.5, 0.7]);
        assert_eq!(img.l1(&img).unwrap(), 0.0);
    }

    #[test]
    fn l1_zeros_vs_ones_is_one() {
        let a = FaceImage::filled(8, 8, [0.0; 3]);
        let b = FaceImage::filled(8, 8, [1.0; 3]);
        assert_eq!(a.l1(&b).unwrap(), 1.0);
    }

    #[test]
    fn l1_matches_bruteforce_on_random_pair() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a = Array3::from_shape_fn((16, 16, 3), |_| rng.random::<f64>());
        let b = Array3::from_shape_fn((16, 16, 3), |_| rng.random::<f64>());
        // Independent brute-force accumulation.
        let mut acc = 0.0;
        let mut n = 0usize;
        for y in 0..16 {
            for x in 0..16 {
                for c in 0..3 {
                    acc += (a[[y, x, c]] - b[[y, x, c]]).abs();
                    n += 1;
                }
            }
        }
        let expect = acc / n as f64;
        let got = image_l1(&a.view().into_dyn(), &b.view().into_dyn()).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn l1_shape_mismatch_errors() {
        let a = FaceImage::filled(8, 8, [0.0; 3]);
        let b = FaceImage::filled(8, 9, [0.0; 3]);
        assert!(matches!(a.l1(&b), Err(crate::Error::ShapeMismatch(_))));
    }

    #[test]
    fn chw_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let img = FaceImage::new(Array3::from_shape_fn((6, 6, 3), |_| rng.random::<f64>()));
        let back = FaceImage::from_chw(&img.to_chw().view()).unwrap();
        assert!(img.l1(&back).unwrap() < 1e-15);
    }
}
