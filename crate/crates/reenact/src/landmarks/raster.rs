//! Rasterization of landmark sets to single-channel landmark images.
//!
//! Each facial-part polyline is stroked onto a zero background. Normalized
//! coordinates map to pixel space as p_px = p * R, so pixel (row r, col c)
//! covers the unit square [c, c+1) x [r, r+1).
//!
//! Two modes:
//! - anti-aliased (default): capsule coverage per pixel center, one-pixel
//!   feather, combined across segments with max so joints don't overbrighten;
//! - hard (`antialias: false`): a supercover grid walk of the centerline
//!   marks every pixel square the half-open segment [p0, p1) passes through.
//!   The hard mode draws 1-pixel strokes regardless of width and exists for
//!   pixel-exact oracle tests.

use super::{part_groups, LandmarkSet};
use crate::error::{Error, Result};
use crate::img::LandmarkImage;
use ndarray::Array2;

#[derive(Debug, Clone, Copy)]
pub struct RasterOptions {
    /// Stroke width multiplier; effective width in pixels is
    /// `width_scale * resolution / 64`, i.e. one pixel at R = 64.
    pub width_scale: f64,
    pub antialias: bool,
}

impl Default for RasterOptions {
    fn default() -> Self {
        Self {
            width_scale: 1.0,
            antialias: true,
        }
    }
}

pub const MIN_RESOLUTION: usize = 16;

/// Rasterize all part-group polylines of a normalized landmark set.
pub fn render_landmark_image(lms: &LandmarkSet, resolution: usize) -> Result<LandmarkImage> {
    render_landmark_image_opts(lms, resolution, RasterOptions::default())
}

pub fn render_landmark_image_opts(
    lms: &LandmarkSet,
    resolution: usize,
    opts: RasterOptions,
) -> Result<LandmarkImage> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::ResolutionTooSmall(resolution));
    }
    let mut pixels = Array2::<f64>::zeros((resolution, resolution));
    let r = resolution as f64;
    for group in part_groups() {
        for (indices, closed) in &group.polylines {
            let pts: Vec<[f64; 2]> = indices
                .iter()
                .map(|&i| [lms.points[i][0] * r, lms.points[i][1] * r])
                .collect();
            stroke_polyline(&mut pixels, &pts, *closed, opts, resolution);
        }
    }
    Ok(LandmarkImage::new(pixels))
}

/// Stroke an explicit polyline given in pixel coordinates. Test hook for the
/// segment-level coverage oracles.
pub fn stroke_segments(
    points: &[[f64; 2]],
    closed: bool,
    resolution: usize,
    opts: RasterOptions,
) -> Result<LandmarkImage> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::ResolutionTooSmall(resolution));
    }
    let mut pixels = Array2::<f64>::zeros((resolution, resolution));
    stroke_polyline(&mut pixels, points, closed, opts, resolution);
    Ok(LandmarkImage::new(pixels))
}

fn stroke_polyline(
    pixels: &mut Array2<f64>,
    pts: &[[f64; 2]],
    closed: bool,
    opts: RasterOptions,
    resolution: usize,
) {
    if pts.len() < 2 {
        return;
    }
    let n = pts.len();
    let last = if closed { n } else { n - 1 };
    for i in 0..last {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        if opts.antialias {
            let w = opts.width_scale * resolution as f64 / 64.0;
            stroke_capsule(pixels, a, b, w, resolution);
        } else {
            supercover(a, b, |x, y| {
                if x >= 0 && y >= 0 && (x as usize) < resolution && (y as usize) < resolution {
                    pixels[[y as usize, x as usize]] = 1.0;
                }
            });
        }
    }
}

fn stroke_capsule(pixels: &mut Array2<f64>, a: [f64; 2], b: [f64; 2], width: f64, res: usize) {
    let half = width / 2.0;
    let reach = half + 1.0;
    let x0 = ((a[0].min(b[0]) - reach).floor().max(0.0)) as usize;
    let x1 = ((a[0].max(b[0]) + reach).ceil().min(res as f64 - 1.0)) as usize;
    let y0 = ((a[1].min(b[1]) - reach).floor().max(0.0)) as usize;
    let y1 = ((a[1].max(b[1]) + reach).ceil().min(res as f64 - 1.0)) as usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let c = [x as f64 + 0.5, y as f64 + 0.5];
            let d = dist_point_segment(c, a, b);
            let cov = (0.5 + (half - d)).clamp(0.0, 1.0);
            if cov > pixels[[y, x]] {
                pixels[[y, x]] = cov;
            }
        }
    }
}

fn dist_point_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Visit every grid cell the half-open segment [a, b) passes through
/// (Amanatides-Woo traversal). The cell containing b is only visited if the
/// segment enters it strictly before its endpoint. A crossing that lands
/// exactly on a lattice corner steps through the x-adjacent cell.
fn supercover(a: [f64; 2], b: [f64; 2], mut mark: impl FnMut(i64, i64)) {
    let mut x = a[0].floor() as i64;
    let mut y = a[1].floor() as i64;
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    mark(x, y);
    if dx == 0.0 && dy == 0.0 {
        return;
    }
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    let mut t_max_x = if dx != 0.0 {
        let edge = if dx > 0.0 { x as f64 + 1.0 } else { x as f64 };
        (edge - a[0]) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy != 0.0 {
        let edge = if dy > 0.0 { y as f64 + 1.0 } else { y as f64 };
        (edge - a[1]) / dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };
    loop {
        if t_max_x <= t_max_y {
            if t_max_x >= 1.0 {
                break;
            }
            x += step_x;
            t_max_x += t_delta_x;
        } else {
            if t_max_y >= 1.0 {
                break;
            }
            y += step_y;
            t_max_y += t_delta_y;
        }
        mark(x, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::{normalize_landmarks, LANDMARK_COUNT};
    use std::collections::HashSet;

    fn hard() -> RasterOptions {
        RasterOptions {
            width_scale: 1.0,
            antialias: false,
        }
    }

    /// Brute-force coverage oracle: walk the half-open segment at fine
    /// parameter steps and collect the cells the sample points fall into.
    fn coverage_oracle(a: [f64; 2], b: [f64; 2]) -> HashSet<(i64, i64)> {
        let mut cells = HashSet::new();
        let steps = 200_000;
        for k in 0..steps {
            let t = k as f64 / steps as f64; // t < 1: half-open
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            cells.insert((p[0].floor() as i64, p[1].floor() as i64));
        }
        cells
    }

    #[test]
    fn horizontal_segment_exact_pixels() {
        // Two-point part from (0.25, 0.5) to (0.75, 0.5) at R = 16 in hard
        // mode: exactly row 8, columns 4..=11 are set.
        let img = stroke_segments(&[[0.25 * 16.0, 0.5 * 16.0], [0.75 * 16.0, 0.5 * 16.0]], false, 16, hard())
            .unwrap();
        for y in 0..16 {
            for x in 0..16 {
                let expect = if y == 8 && (4..=11).contains(&x) { 1.0 } else { 0.0 };
                assert_eq!(img.pixels[[y, x]], expect, "pixel ({y},{x})");
            }
        }
        // Cross-check against the brute-force coverage oracle.
        let cells = coverage_oracle([4.0, 8.0], [12.0, 8.0]);
        let lit: HashSet<(i64, i64)> = (0..16)
            .flat_map(|y| (0..16).map(move |x| (x as i64, y as i64)))
            .filter(|&(x, y)| img.pixels[[y as usize, x as usize]] > 0.0)
            .collect();
        assert_eq!(lit, cells);
    }

    #[test]
    fn diagonal_segment_matches_coverage_oracle() {
        // General-position endpoints: no exact lattice-corner crossings.
        let a = [3.17, 4.71];
        let b = [13.64, 9.13];
        let img = stroke_segments(&[a, b], false, 16, hard()).unwrap();
        let lit: HashSet<(i64, i64)> = (0..16)
            .flat_map(|y| (0..16).map(move |x| (x as i64, y as i64)))
            .filter(|&(x, y)| img.pixels[[y as usize, x as usize]] > 0.0)
            .collect();
        assert_eq!(lit, coverage_oracle(a, b));
    }

    #[test]
    fn integer_pixel_shift_moves_columns() {
        // Interior shape shifted by exactly k pixels: output shifts k columns.
        let res = 32;
        let base: Vec<[f64; 2]> = vec![[6.3, 10.2], [14.8, 12.9], [11.0, 20.5]];
        let k = 5.0;
        let shifted: Vec<[f64; 2]> = base.iter().map(|p| [p[0] + k, p[1]]).collect();
        let img_a = stroke_segments(&base, true, res, hard()).unwrap();
        let img_b = stroke_segments(&shifted, true, res, hard()).unwrap();
        for y in 0..res {
            for x in 0..res - 5 {
                assert_eq!(
                    img_a.pixels[[y, x]],
                    img_b.pixels[[y, x + 5]],
                    "pixel ({y},{x})"
                );
            }
        }
    }

    fn face_like() -> LandmarkSet {
        let pts: Vec<[f64; 2]> = (0..LANDMARK_COUNT)
            .map(|i| {
                let t = i as f64 * 0.7;
                [50.0 + 40.0 * t.cos(), 60.0 + 45.0 * (t * 1.3).sin()]
            })
            .collect();
        normalize_landmarks(&pts, 0.1).unwrap()
    }

    #[test]
    fn render_is_deterministic_and_bounded() {
        let lms = face_like();
        let a = render_landmark_image(&lms, 64).unwrap();
        let b = render_landmark_image(&lms, 64).unwrap();
        assert_eq!(a.pixels, b.pixels);
        assert!(a.pixels.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(a.pixels.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn too_small_resolution_rejected() {
        let lms = face_like();
        assert!(matches!(
            render_landmark_image(&lms, 8),
            Err(Error::ResolutionTooSmall(8))
        ));
    }
}
