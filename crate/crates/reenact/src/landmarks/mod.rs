//! 68-point facial landmark sets: normalization, part structure, file I/O.
//!
//! Point order follows the common 68-point annotation: jaw contour 0-16,
//! brows 17-26, nose bridge 27-30, nose base 31-35, eyes 36-47, outer lip
//! 48-59, inner lip 60-67. Coordinates are x right, y down.

pub mod raster;
pub mod synth;

use crate::error::{Error, Result};
use std::path::Path;

pub const LANDMARK_COUNT: usize = 68;

/// Default margin used when normalizing landmark bounding boxes into the
/// unit square: points end up inside [0.1, 0.9]^2.
pub const DEFAULT_MARGIN: f64 = 0.1;

/// 68 labeled 2-D points in normalized face coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub points: [[f64; 2]; LANDMARK_COUNT],
}

/// One facial part: a named bundle of polylines over landmark indices.
/// The lips group carries both the outer and the inner ring.
#[derive(Debug, Clone)]
pub struct PartGroup {
    pub name: &'static str,
    pub polylines: Vec<(Vec<usize>, bool)>, // (indices, closed)
}

/// The fixed partition of the 68 indices into 8 facial-part groups.
pub fn part_groups() -> Vec<PartGroup> {
    let seg = |r: std::ops::Range<usize>| r.collect::<Vec<_>>();
    vec![
        PartGroup { name: "jaw", polylines: vec![(seg(0..17), false)] },
        PartGroup { name: "left_brow", polylines: vec![(seg(17..22), false)] },
        PartGroup { name: "right_brow", polylines: vec![(seg(22..27), false)] },
        PartGroup { name: "nose_bridge", polylines: vec![(seg(27..31), false)] },
        PartGroup { name: "nose_base", polylines: vec![(seg(31..36), false)] },
        PartGroup { name: "left_eye", polylines: vec![(seg(36..42), true)] },
        PartGroup { name: "right_eye", polylines: vec![(seg(42..48), true)] },
        PartGroup {
            name: "lips",
            polylines: vec![(seg(48..60), true), (seg(60..68), true)],
        },
    ]
}

/// Index of the bilaterally mirrored landmark (jaw 0<->16, eyes 36<->45, ...).
pub fn mirror_index(i: usize) -> usize {
    match i {
        0..=16 => 16 - i,
        17..=26 => 43 - i,          // 17<->26, 18<->25, ...
        27..=30 => i,               // nose bridge is on the midline
        31..=35 => 66 - i,          // 31<->35, 32<->34
        36..=39 => 81 - i,          // 36<->45, 37<->44, 38<->43, 39<->42
        40..=41 => 87 - i,          // 40<->47, 41<->46
        42..=45 => 81 - i,
        46..=47 => 87 - i,
        48..=54 => 102 - i,         // 48<->54, 51 self
        55..=59 => 114 - i,         // 55<->59, 57 self
        60..=64 => 124 - i,         // 60<->64, 62 self
        65..=67 => 132 - i,         // 65<->67, 66 self
        _ => panic!("landmark index {i} out of range"),
    }
}

impl LandmarkSet {
    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in &self.points {
            for a in 0..2 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        (min, max)
    }

    /// Read a landmark file: a JSON array of 68 [x, y] pixel-coordinate pairs.
    pub fn load_raw(path: &Path) -> Result<Vec<[f64; 2]>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Ingest(format!("reading {}: {e}", path.display())))?;
        let pts: Vec<[f64; 2]> = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if pts.len() != LANDMARK_COUNT {
            return Err(Error::Parse(format!(
                "{}: expected {LANDMARK_COUNT} points, got {}",
                path.display(),
                pts.len()
            )));
        }
        Ok(pts)
    }

    pub fn save_raw(points: &[[f64; 2]], path: &Path) -> Result<()> {
        let text = serde_json::to_string(points)
            .map_err(|e| Error::Parse(format!("serializing landmarks: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Similarity transform (uniform scale + translation) placing a landmark
/// bounding box inside [margin, 1-margin]^2, aspect ratio preserved.
pub(crate) fn normalize_transform(
    points: &[[f64; 2]],
    margin: f64,
) -> Result<(f64, [f64; 2])> {
    if !(0.0..0.5).contains(&margin) {
        return Err(Error::ParamOutOfRange(format!("margin {margin}")));
    }
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in points {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::DegenerateLandmarks("non-finite coordinate".into()));
        }
        for a in 0..2 {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    let w = max[0] - min[0];
    let h = max[1] - min[1];
    if w <= 0.0 || h <= 0.0 {
        return Err(Error::DegenerateLandmarks(format!(
            "bounding box {w} x {h} has zero width or height"
        )));
    }
    let scale = (1.0 - 2.0 * margin) / w.max(h);
    let center = [(min[0] + max[0]) / 2.0, (min[1] + max[1]) / 2.0];
    Ok((scale, center))
}

/// Map 68 raw pixel-coordinate points into normalized face coordinates.
///
/// The landmark bounding box lands inside [margin, 1-margin]^2 centered at
/// (0.5, 0.5) with aspect ratio preserved, so relative geometry is unchanged.
/// Inputs that are already normalized pass through bit-identically, which
/// also makes the operation exactly idempotent.
pub fn normalize_landmarks(points: &[[f64; 2]], margin: f64) -> Result<LandmarkSet> {
    if points.len() != LANDMARK_COUNT {
        return Err(Error::ShapeMismatch(format!(
            "expected {LANDMARK_COUNT} points, got {}",
            points.len()
        )));
    }
    let (scale, center) = normalize_transform(points, margin)?;
    let mut out = [[0.0f64; 2]; LANDMARK_COUNT];
    let identity = (scale - 1.0).abs() <= 1e-9
        && (center[0] - 0.5).abs() <= 1e-9
        && (center[1] - 0.5).abs() <= 1e-9;
    for (dst, src) in out.iter_mut().zip(points) {
        if identity {
            *dst = *src;
        } else {
            dst[0] = (src[0] - center[0]) * scale + 0.5;
            dst[1] = (src[1] - center[1]) * scale + 0.5;
        }
    }
    Ok(LandmarkSet { points: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_points() -> Vec<[f64; 2]> {
        // A rough face-like spread in pixel coordinates.
        (0..LANDMARK_COUNT)
            .map(|i| {
                let t = i as f64 / (LANDMARK_COUNT - 1) as f64;
                [
                    40.0 + 120.0 * (t * 6.28).sin().abs(),
                    30.0 + 150.0 * t,
                ]
            })
            .collect()
    }

    #[test]
    fn normalized_bbox_fits_margin() {
        let lms = normalize_landmarks(&sample_points(), 0.1).unwrap();
        let (min, max) = lms.bbox();
        for a in 0..2 {
            assert!(min[a] >= 0.1 - 1e-12, "min {:?}", min);
            assert!(max[a] <= 0.9 + 1e-12, "max {:?}", max);
        }
        // The longer side spans the full band.
        let spans = [max[0] - min[0], max[1] - min[1]];
        assert!((spans[0].max(spans[1]) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn exact_span_is_identity() {
        // Points already spanning exactly [0.1, 0.9]^2 come back unchanged.
        let mut pts = vec![[0.5, 0.5]; LANDMARK_COUNT];
        pts[0] = [0.1, 0.1];
        pts[1] = [0.9, 0.9];
        pts[2] = [0.1, 0.9];
        pts[3] = [0.9, 0.1];
        let lms = normalize_landmarks(&pts, 0.1).unwrap();
        for (a, b) in lms.points.iter().zip(&pts) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn similarity_invariance() {
        let pts = sample_points();
        let moved: Vec<[f64; 2]> = pts
            .iter()
            .map(|p| [p[0] * 2.0 + 7.0, p[1] * 2.0 - 3.0])
            .collect();
        let a = normalize_landmarks(&pts, 0.1).unwrap();
        let b = normalize_landmarks(&moved, 0.1).unwrap();
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert!((pa[0] - pb[0]).abs() < 1e-12 && (pa[1] - pb[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn all_points_equal_is_degenerate() {
        let pts = vec![[3.0, 4.0]; LANDMARK_COUNT];
        assert!(matches!(
            normalize_landmarks(&pts, 0.1),
            Err(Error::DegenerateLandmarks(_))
        ));
    }

    #[test]
    fn idempotent_exactly() {
        let once = normalize_landmarks(&sample_points(), 0.1).unwrap();
        let twice = normalize_landmarks(&once.points, 0.1).unwrap();
        for (a, b) in once.points.iter().zip(&twice.points) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn mirror_index_is_involution_and_partition_preserving() {
        for i in 0..LANDMARK_COUNT {
            let m = mirror_index(i);
            assert!(m < LANDMARK_COUNT);
            assert_eq!(mirror_index(m), i, "index {i}");
        }
    }

    #[test]
    fn part_groups_partition_all_indices() {
        let mut seen = vec![0usize; LANDMARK_COUNT];
        let groups = part_groups();
        assert_eq!(groups.len(), 8);
        for g in &groups {
            for (line, _) in &g.polylines {
                for &i in line {
                    seen[i] += 1;
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "indices not partitioned: {seen:?}");
    }
}
