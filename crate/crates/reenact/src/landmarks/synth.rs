//! Parametric synthetic faces: a posable 3-D 68-point template plus a
//! procedural face renderer.
//!
//! The generator gives complete factorial ground truth: for any identity
//! vector, expression vector and yaw, both the landmark set and the rendered
//! face exist, so every reenactment pairing has an exact target. The oracle
//! transformer is a direct consequence: T*(source identity, driving motion)
//! is just `synth_landmarks` at that combination.
//!
//! Geometry pipeline: neutral template -> expression offsets -> identity
//! deformation -> yaw rotation about the vertical axis -> orthographic
//! projection -> bounding-box normalization.

use super::{normalize_transform, LandmarkSet, DEFAULT_MARGIN, LANDMARK_COUNT};
use crate::error::{Error, Result};
use crate::img::FaceImage;
use ndarray::Array3;

pub const IDENTITY_DIM: usize = 6;
pub const EXPRESSION_DIM: usize = 4;

/// Yaw parameter +-1 maps to +-60 degrees of head rotation.
pub const MAX_YAW_RAD: f64 = std::f64::consts::PI / 3.0;

/// Parameters of one synthetic face.
///
/// Identity components (each in [-1, 1]): face width, eye spacing, nose
/// length, jaw curvature, skin tone, eye color. The first four deform
/// geometry; the last two only key rendering colors.
///
/// Expression components: mouth openness in [0, 1], mouth-corner lift in
/// [-1, 1], brow raise in [-1, 1], eye openness in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFaceParams {
    pub identity: [f64; IDENTITY_DIM],
    pub expression: [f64; EXPRESSION_DIM],
    pub yaw: f64,
}

impl SynthFaceParams {
    pub fn neutral() -> Self {
        Self {
            identity: [0.0; IDENTITY_DIM],
            expression: [0.0, 0.0, 0.0, 0.7],
            yaw: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let names = [
            "face_width",
            "eye_spacing",
            "nose_length",
            "jaw_curve",
            "skin_tone",
            "eye_color",
        ];
        for (v, name) in self.identity.iter().zip(names) {
            if !v.is_finite() || v.abs() > 1.0 {
                return Err(Error::ParamOutOfRange(format!("identity.{name} = {v}")));
            }
        }
        let (lo, hi, enames) = (
            [0.0, -1.0, -1.0, 0.0],
            [1.0, 1.0, 1.0, 1.0],
            ["mouth_open", "corner_lift", "brow_raise", "eye_open"],
        );
        for i in 0..EXPRESSION_DIM {
            let v = self.expression[i];
            if !v.is_finite() || v < lo[i] || v > hi[i] {
                return Err(Error::ParamOutOfRange(format!(
                    "expression.{} = {v}",
                    enames[i]
                )));
            }
        }
        if !self.yaw.is_finite() || self.yaw.abs() > 1.0 {
            return Err(Error::ParamOutOfRange(format!("yaw = {}", self.yaw)));
        }
        Ok(())
    }
}

fn mirrored(p: [f64; 3]) -> [f64; 3] {
    [-p[0], p[1], p[2]]
}

/// Neutral 3-D template, exactly mirror-symmetric about x = 0.
/// Units are half-face-widths; y grows downward, z toward the viewer.
fn template() -> [[f64; 3]; LANDMARK_COUNT] {
    let mut t = [[0.0f64; 3]; LANDMARK_COUNT];
    // Jaw: right half 8..=16 (chin to right ear), mirrored into 0..=7.
    for i in 8..=16 {
        let u = (i - 8) as f64 / 8.0;
        let s = (u * std::f64::consts::FRAC_PI_2).sin();
        let c = (u * std::f64::consts::FRAC_PI_2).cos();
        t[i] = [s, 1.05 * c - 0.05, 0.30 - 0.75 * s];
    }
    for i in 9..=16 {
        t[16 - i] = mirrored(t[i]);
    }
    // Right brow 22..=26 (inner to outer), mirrored into 17..=21.
    for i in 22..=26 {
        let u = (i - 22) as f64 / 4.0;
        t[i] = [
            0.14 + 0.48 * u,
            -0.42 - 0.05 * (std::f64::consts::PI * u).sin(),
            0.25 - 0.10 * u,
        ];
    }
    for k in 0..5 {
        t[17 + k] = mirrored(t[26 - k]);
    }
    // Nose bridge 27..=30 on the midline.
    for i in 27..=30 {
        let u = (i - 27) as f64;
        t[i] = [0.0, -0.30 + 0.1167 * u, 0.32 + 0.06 * u];
    }
    // Nose base 31..=35.
    t[33] = [0.0, 0.20, 0.40];
    t[34] = [0.07, 0.185, 0.38];
    t[35] = [0.14, 0.16, 0.36];
    t[31] = mirrored(t[35]);
    t[32] = mirrored(t[34]);
    // Right eye 42..=47: hexagon, inner corner first, over the top.
    let (ecx, ecy, ez, rx, ry) = (0.40, -0.28, 0.22, 0.15, 0.055);
    let eye = [
        [-rx, 0.0],
        [-0.45 * rx, -ry],
        [0.45 * rx, -ry],
        [rx, 0.0],
        [0.45 * rx, ry],
        [-0.45 * rx, ry],
    ];
    for (k, e) in eye.iter().enumerate() {
        t[42 + k] = [ecx + e[0], ecy + e[1], ez];
    }
    // Left eye 36..=41 under the standard mirror correspondence.
    t[36] = mirrored(t[45]);
    t[37] = mirrored(t[44]);
    t[38] = mirrored(t[43]);
    t[39] = mirrored(t[42]);
    t[40] = mirrored(t[47]);
    t[41] = mirrored(t[46]);
    // Lips around (0, 0.52): outer ring 48..=59, inner ring 60..=67.
    let lip = [
        (-0.26, 0.0),
        (-0.17, -0.055),
        (-0.06, -0.075),
        (0.0, -0.07),
        (0.06, -0.075),
        (0.17, -0.055),
        (0.26, 0.0),
        (0.17, 0.07),
        (0.06, 0.095),
        (0.0, 0.10),
        (-0.06, 0.095),
        (-0.17, 0.07),
    ];
    for (k, (x, y)) in lip.iter().enumerate() {
        t[48 + k] = [*x, 0.52 + y, 0.32];
    }
    let inner = [
        (-0.19, 0.0),
        (-0.08, -0.028),
        (0.0, -0.034),
        (0.08, -0.028),
        (0.19, 0.0),
        (0.08, 0.030),
        (0.0, 0.036),
        (-0.08, 0.030),
    ];
    for (k, (x, y)) in inner.iter().enumerate() {
        t[60 + k] = [*x, 0.52 + y, 0.31];
    }
    t
}

/// Auxiliary forehead arc (not part of the 68): right ear over the crown to
/// the left ear. Used only to close the head polygon when rendering faces.
fn forehead_arc() -> Vec<[f64; 3]> {
    let n = 12;
    (0..=n)
        .map(|k| {
            let phi = std::f64::consts::PI * k as f64 / n as f64;
            [
                phi.cos(),
                -0.05 - 0.90 * phi.sin(),
                -0.45 + 0.55 * phi.sin(),
            ]
        })
        .collect()
}

fn apply_expression(t: &mut [[f64; 3]], ex: &[f64; EXPRESSION_DIM]) {
    let (open, lift, brow, eye) = (ex[0], ex[1], ex[2], ex[3]);
    // Mouth openness: inner ring separates, outer ring follows at lower rate.
    let wc = |i: usize| if matches!(i, 62 | 66 | 51 | 57) { 1.0 } else { 0.8 };
    for i in [61, 62, 63] {
        t[i][1] -= open * 0.050 * wc(i);
    }
    for i in [65, 66, 67] {
        t[i][1] += open * 0.080 * wc(i);
    }
    for i in 49..=53 {
        t[i][1] -= open * 0.020 * wc(i);
    }
    for i in 55..=59 {
        t[i][1] += open * 0.045 * wc(i);
    }
    // Corner lift: both rings' corner neighborhoods move up (negative y).
    for i in [48, 54, 60, 64] {
        t[i][1] -= lift * 0.050;
    }
    for i in [49, 53, 55, 59] {
        t[i][1] -= lift * 0.028;
    }
    // Brow raise.
    for i in 17..27 {
        t[i][1] -= brow * 0.070;
    }
    // Eye openness scales lid offsets about each eye's corner line.
    let f = 0.25 + 0.75 * eye;
    for (cy, lids) in [(-0.28, [37usize, 38, 40, 41]), (-0.28, [43, 44, 46, 47])] {
        for i in lids {
            t[i][1] = cy + (t[i][1] - cy) * f;
        }
    }
}

fn apply_identity(t: &mut [[f64; 3]], aux: &mut [[f64; 3]], id: &[f64; IDENTITY_DIM]) {
    let width = 1.0 + 0.15 * id[0];
    let spacing = 1.0 + 0.15 * id[1];
    let nose = 1.0 + 0.20 * id[2];
    let jaw = id[3];
    for p in t.iter_mut().chain(aux.iter_mut()) {
        p[0] *= width;
    }
    for i in 17..48 {
        if (27..36).contains(&i) {
            continue;
        }
        t[i][0] *= spacing;
    }
    let anchor = -0.30;
    for i in 27..36 {
        t[i][1] = anchor + (t[i][1] - anchor) * nose;
    }
    for i in 0..17 {
        let u = i as f64 / 16.0;
        t[i][0] *= 1.0 + 0.12 * jaw * (std::f64::consts::PI * u).sin();
    }
}

fn project(p: [f64; 3], yaw_rad: f64) -> [f64; 2] {
    let (s, c) = yaw_rad.sin_cos();
    [p[0] * c + p[2] * s, p[1]]
}

/// Posed, projected, normalized geometry: the 68 landmarks plus the forehead
/// arc in the same normalized frame.
pub(crate) fn synth_geometry(params: &SynthFaceParams) -> Result<(LandmarkSet, Vec<[f64; 2]>)> {
    params.validate()?;
    let mut t = template();
    apply_expression(&mut t, &params.expression);
    let mut aux = forehead_arc();
    apply_identity(&mut t, &mut aux, &params.identity);
    let yaw_rad = params.yaw * MAX_YAW_RAD;
    let pts2: Vec<[f64; 2]> = t.iter().map(|&p| project(p, yaw_rad)).collect();
    let aux2: Vec<[f64; 2]> = aux.iter().map(|&p| project(p, yaw_rad)).collect();
    let (scale, center) = normalize_transform(&pts2, DEFAULT_MARGIN)?;
    let map = |p: &[f64; 2]| {
        [
            (p[0] - center[0]) * scale + 0.5,
            (p[1] - center[1]) * scale + 0.5,
        ]
    };
    let mut points = [[0.0f64; 2]; LANDMARK_COUNT];
    for (dst, src) in points.iter_mut().zip(&pts2) {
        *dst = map(src);
    }
    Ok((LandmarkSet { points }, aux2.iter().map(map).collect()))
}

/// Deterministic landmark set for the given parameters, normalized to the
/// default margin.
pub fn synth_landmarks(params: &SynthFaceParams) -> Result<LandmarkSet> {
    Ok(synth_geometry(params)?.0)
}

// ---------------------------------------------------------------------------
// Procedural face renderer.
// ---------------------------------------------------------------------------

const BG: [f64; 3] = [0.07, 0.08, 0.10];

fn skin_color(tone: f64) -> [f64; 3] {
    let f = 1.0 + 0.22 * tone;
    [
        (0.82 * f).clamp(0.0, 1.0),
        (0.66 * f).clamp(0.0, 1.0),
        (0.52 * f).clamp(0.0, 1.0),
    ]
}

fn iris_color(key: f64) -> [f64; 3] {
    let u = (key + 1.0) / 2.0;
    [0.18 + 0.30 * u, 0.22 + 0.16 * (1.0 - u), 0.48 - 0.30 * u]
}

fn scale_color(c: [f64; 3], f: f64) -> [f64; 3] {
    [c[0] * f, c[1] * f, c[2] * f]
}

type Canvas = Array3<f64>;

fn blend(canvas: &mut Canvas, y: i64, x: i64, color: [f64; 3], alpha: f64) {
    if alpha <= 0.0 {
        return;
    }
    let (h, w) = (canvas.shape()[0] as i64, canvas.shape()[1] as i64);
    if y < 0 || x < 0 || y >= h || x >= w {
        return;
    }
    let a = alpha.min(1.0);
    for c in 0..3 {
        let v = canvas[[y as usize, x as usize, c]];
        canvas[[y as usize, x as usize, c]] = v * (1.0 - a) + color[c] * a;
    }
}

fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let xcross = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < xcross {
                inside = !inside;
            }
        }
    }
    inside
}

/// 4x4 supersampled even-odd polygon fill.
fn fill_polygon(canvas: &mut Canvas, poly: &[[f64; 2]], color: [f64; 3]) {
    if poly.len() < 3 {
        return;
    }
    let (h, w) = (canvas.shape()[0], canvas.shape()[1]);
    let minx = poly.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let maxx = poly.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let miny = poly.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let maxy = poly.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let x0 = (minx.floor().max(0.0)) as usize;
    let x1 = (maxx.ceil().min(w as f64 - 1.0)).max(0.0) as usize;
    let y0 = (miny.floor().max(0.0)) as usize;
    let y1 = (maxy.ceil().min(h as f64 - 1.0)).max(0.0) as usize;
    const OFFS: [f64; 4] = [0.125, 0.375, 0.625, 0.875];
    for y in y0..=y1 {
        for x in x0..=x1 {
            let mut hits = 0u32;
            for oy in OFFS {
                for ox in OFFS {
                    if point_in_polygon([x as f64 + ox, y as f64 + oy], poly) {
                        hits += 1;
                    }
                }
            }
            if hits > 0 {
                blend(canvas, y as i64, x as i64, color, hits as f64 / 16.0);
            }
        }
    }
}

fn fill_disk(canvas: &mut Canvas, center: [f64; 2], radius: f64, color: [f64; 3]) {
    let x0 = (center[0] - radius - 1.0).floor() as i64;
    let x1 = (center[0] + radius + 1.0).ceil() as i64;
    let y0 = (center[1] - radius - 1.0).floor() as i64;
    let y1 = (center[1] + radius + 1.0).ceil() as i64;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = ((x as f64 + 0.5 - center[0]).powi(2)
                + (y as f64 + 0.5 - center[1]).powi(2))
            .sqrt();
            let alpha = (0.5 + (radius - d)).clamp(0.0, 1.0);
            blend(canvas, y, x, color, alpha);
        }
    }
}

fn stroke(canvas: &mut Canvas, pts: &[[f64; 2]], closed: bool, width: f64, color: [f64; 3]) {
    if pts.len() < 2 {
        return;
    }
    let n = pts.len();
    let last = if closed { n } else { n - 1 };
    let half = width / 2.0;
    for i in 0..last {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let x0 = (a[0].min(b[0]) - half - 1.0).floor() as i64;
        let x1 = (a[0].max(b[0]) + half + 1.0).ceil() as i64;
        let y0 = (a[1].min(b[1]) - half - 1.0).floor() as i64;
        let y1 = (a[1].max(b[1]) + half + 1.0).ceil() as i64;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let p = [x as f64 + 0.5, y as f64 + 0.5];
                let ab = [b[0] - a[0], b[1] - a[1]];
                let len2 = ab[0] * ab[0] + ab[1] * ab[1];
                let t = if len2 > 0.0 {
                    (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                let alpha = (0.5 + (half - d)).clamp(0.0, 1.0);
                blend(canvas, y, x, color, alpha);
            }
        }
    }
}

/// Deterministic procedural rendering of the parametric face.
///
/// All features are drawn from the same posed landmark geometry as
/// [`synth_landmarks`], so the same identity at two poses shows rigidly
/// consistent features, and colors are keyed by the identity vector.
pub fn render_synthetic_face(params: &SynthFaceParams, resolution: usize) -> Result<FaceImage> {
    if resolution < super::raster::MIN_RESOLUTION {
        return Err(Error::ResolutionTooSmall(resolution));
    }
    let (lms, forehead) = synth_geometry(params)?;
    let r = resolution as f64;
    let px = |p: [f64; 2]| [p[0] * r, p[1] * r];
    let lp: Vec<[f64; 2]> = lms.points.iter().map(|&p| px(p)).collect();
    let fp: Vec<[f64; 2]> = forehead.iter().map(|&p| px(p)).collect();

    let mut canvas = Array3::from_shape_fn((resolution, resolution, 3), |(_, _, c)| BG[c]);
    let skin = skin_color(params.identity[4]);
    let line_w = (r / 64.0).max(1.0);

    // Head: jaw contour (left ear -> chin -> right ear) closed by the
    // forehead arc (right ear -> crown -> left ear).
    let mut head: Vec<[f64; 2]> = lp[0..17].to_vec();
    head.extend(fp.iter().copied());
    fill_polygon(&mut canvas, &head, skin);
    stroke(&mut canvas, &lp[0..17], false, line_w, scale_color(skin, 0.72));

    // Brows.
    stroke(&mut canvas, &lp[17..22], false, 1.8 * line_w, [0.22, 0.15, 0.10]);
    stroke(&mut canvas, &lp[22..27], false, 1.8 * line_w, [0.22, 0.15, 0.10]);

    // Nose.
    stroke(&mut canvas, &lp[27..31], false, line_w, scale_color(skin, 0.75));
    stroke(&mut canvas, &lp[31..36], false, line_w, scale_color(skin, 0.75));

    // Eyes: sclera, identity-keyed iris, pupil, lash line.
    let iris = iris_color(params.identity[5]);
    for range in [36..42, 42..48] {
        let eye: Vec<[f64; 2]> = lp[range.clone()].to_vec();
        fill_polygon(&mut canvas, &eye, [0.93, 0.93, 0.90]);
        let cx = eye.iter().map(|p| p[0]).sum::<f64>() / eye.len() as f64;
        let cy = eye.iter().map(|p| p[1]).sum::<f64>() / eye.len() as f64;
        let h_half = eye
            .iter()
            .map(|p| (p[1] - cy).abs())
            .fold(0.0f64, f64::max);
        let w_half = eye
            .iter()
            .map(|p| (p[0] - cx).abs())
            .fold(0.0f64, f64::max);
        let r_iris = (1.4 * h_half).min(0.6 * w_half).max(0.75);
        fill_disk(&mut canvas, [cx, cy], r_iris, iris);
        fill_disk(&mut canvas, [cx, cy], 0.45 * r_iris, [0.05, 0.05, 0.06]);
        stroke(&mut canvas, &eye, true, 0.8 * line_w, [0.15, 0.10, 0.08]);
    }

    // Mouth: lips from the outer ring, dark interior from the inner ring.
    let outer: Vec<[f64; 2]> = lp[48..60].to_vec();
    let inner: Vec<[f64; 2]> = lp[60..68].to_vec();
    fill_polygon(&mut canvas, &outer, [0.62, 0.29, 0.27]);
    fill_polygon(&mut canvas, &inner, [0.22, 0.07, 0.08]);

    Ok(FaceImage::new(canvas))
}
