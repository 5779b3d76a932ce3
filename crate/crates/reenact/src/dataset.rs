//! Dataset ingestion and the synthetic factorial dataset.
//!
//! On-disk layout:
//!
//! ```text
//! root/
//!   identities.json                 # names, train/test split, expressions, poses
//!   images/<id>/<expr>_<poseidx>.png
//!   landmarks/<id>/<expr>_<poseidx>.json   # 68 [x, y] pixel pairs
//! ```
//!
//! Every face image must have a matching landmark file. The train/test split
//! is by identity with no overlap, mirroring the usual unseen-identity
//! evaluation convention.

use crate::error::{Error, Result};
use crate::img::{FaceImage, LandmarkImage};
use crate::landmarks::raster::render_landmark_image;
use crate::landmarks::synth::{render_synthetic_face, synth_landmarks, SynthFaceParams};
use crate::landmarks::{normalize_landmarks, LandmarkSet, DEFAULT_MARGIN};
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// (identity, expression, pose) annotation of one sample; pose is the yaw
/// scalar in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotationTriple {
    pub identity: usize,
    pub expression: usize,
    pub pose: f64,
}

/// Contents of `identities.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub identities: Vec<String>,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub expressions: Vec<String>,
    pub poses: Vec<f64>,
}

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// One indexed sample: annotation indices plus file paths.
#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub identity: usize,
    pub expression: usize,
    pub pose: usize,
    pub face_path: PathBuf,
    pub landmark_path: PathBuf,
}

/// Index over a dataset tree, with landmarks parsed and validated.
#[derive(Debug)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    pub records: Vec<SampleRecord>,
    pub train_identities: Vec<usize>,
    pub test_identities: Vec<usize>,
    lookup: BTreeMap<(usize, usize, usize), usize>,
}

impl DatasetIndex {
    pub fn find(&self, identity: usize, expression: usize, pose: usize) -> Option<usize> {
        self.lookup.get(&(identity, expression, pose)).copied()
    }

    pub fn require(&self, identity: usize, expression: usize, pose: usize) -> Result<usize> {
        self.find(identity, expression, pose).ok_or_else(|| {
            Error::Pairing(format!(
                "no sample for identity {identity}, expression {expression}, pose {pose}"
            ))
        })
    }

    pub fn annotation(&self, record: usize) -> AnnotationTriple {
        let r = &self.records[record];
        AnnotationTriple {
            identity: r.identity,
            expression: r.expression,
            pose: self.manifest.poses[r.pose],
        }
    }

    pub fn n_expressions(&self) -> usize {
        self.manifest.expressions.len()
    }

    pub fn n_poses(&self) -> usize {
        self.manifest.poses.len()
    }
}

fn resolve_split(manifest: &DatasetManifest) -> Result<(Vec<usize>, Vec<usize>)> {
    let idx_of = |name: &str| -> Result<usize> {
        manifest
            .identities
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Split(format!("split names unknown identity {name:?}")))
    };
    let train: Vec<usize> = manifest.train.iter().map(|n| idx_of(n)).collect::<Result<_>>()?;
    let test: Vec<usize> = manifest.test.iter().map(|n| idx_of(n)).collect::<Result<_>>()?;
    for t in &test {
        if train.contains(t) {
            return Err(Error::Split(format!(
                "identity {:?} appears in both train and test",
                manifest.identities[*t]
            )));
        }
    }
    Ok((train, test))
}

/// Build the index of a dataset tree, validating the split, the landmark
/// files (68 points each) and the presence of each referenced image.
pub fn ingest_dataset(root: &Path) -> Result<DatasetIndex> {
    let manifest_path = root.join("identities.json");
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| Error::Ingest(format!("reading {}: {e}", manifest_path.display())))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", manifest_path.display())))?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Version(format!(
            "dataset format {} (expected {DATASET_FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let (train_identities, test_identities) = resolve_split(&manifest)?;

    let mut records = Vec::new();
    let mut lookup = BTreeMap::new();
    for (id_idx, id_name) in manifest.identities.iter().enumerate() {
        for (ex_idx, ex_name) in manifest.expressions.iter().enumerate() {
            for p_idx in 0..manifest.poses.len() {
                let stem = format!("{ex_name}_{p_idx}");
                let face_path = root.join("images").join(id_name).join(format!("{stem}.png"));
                if !face_path.exists() {
                    continue;
                }
                let landmark_path = root
                    .join("landmarks")
                    .join(id_name)
                    .join(format!("{stem}.json"));
                if !landmark_path.exists() {
                    return Err(Error::Ingest(format!(
                        "missing landmark file {}",
                        landmark_path.display()
                    )));
                }
                // Parse eagerly so a malformed tree fails at ingest.
                LandmarkSet::load_raw(&landmark_path)?;
                image::image_dimensions(&face_path).map_err(|e| {
                    Error::Ingest(format!("unreadable image {}: {e}", face_path.display()))
                })?;
                lookup.insert((id_idx, ex_idx, p_idx), records.len());
                records.push(SampleRecord {
                    identity: id_idx,
                    expression: ex_idx,
                    pose: p_idx,
                    face_path,
                    landmark_path,
                });
            }
        }
    }
    Ok(DatasetIndex {
        root: root.to_path_buf(),
        manifest,
        records,
        train_identities,
        test_identities,
        lookup,
    })
}

/// Fully loaded dataset: faces, normalized landmark sets, and landmark
/// images rendered once at the working resolution.
pub struct LoadedDataset {
    pub index: DatasetIndex,
    pub faces: Vec<FaceImage>,
    pub landmarks: Vec<LandmarkSet>,
    pub landmark_images: Vec<LandmarkImage>,
    pub resolution: usize,
}

impl LoadedDataset {
    pub fn load(index: DatasetIndex, resolution: usize) -> Result<Self> {
        let mut faces = Vec::with_capacity(index.records.len());
        let mut landmarks = Vec::with_capacity(index.records.len());
        let mut landmark_images = Vec::with_capacity(index.records.len());
        for rec in &index.records {
            let raw = LandmarkSet::load_raw(&rec.landmark_path)?;
            let lms = normalize_landmarks(&raw, DEFAULT_MARGIN)?;
            landmark_images.push(render_landmark_image(&lms, resolution)?);
            landmarks.push(lms);
            let face = FaceImage::load_png(&rec.face_path)?;
            if face.height() != resolution || face.width() != resolution {
                return Err(Error::Ingest(format!(
                    "{}: image is {}x{}, expected {resolution}x{resolution}",
                    rec.face_path.display(),
                    face.width(),
                    face.height()
                )));
            }
            faces.push(face);
        }
        Ok(Self { index, faces, landmarks, landmark_images, resolution })
    }

    pub fn n_records(&self) -> usize {
        self.index.records.len()
    }

    /// Record indices belonging to the given identities, in index order.
    pub fn records_of_identities(&self, ids: &[usize]) -> Vec<usize> {
        self.index
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| ids.contains(&r.identity))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_records(&self) -> Vec<usize> {
        self.records_of_identities(&self.index.train_identities)
    }

    pub fn test_records(&self) -> Vec<usize> {
        self.records_of_identities(&self.index.test_identities)
    }

    /// All records with the given identity and pose, any expression.
    pub fn pose_reference_candidates(&self, identity: usize, pose: usize) -> Vec<usize> {
        self.index
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.identity == identity && r.pose == pose)
            .map(|(i, _)| i)
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Synthetic dataset generation
// ---------------------------------------------------------------------------

fn pose_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|k| -1.0 + 2.0 * k as f64 / (n - 1) as f64)
        .collect()
}

/// Identity and expression parameter banks drawn once per dataset seed; the
/// expression bank is shared across identities so the grid stays factorial.
fn parameter_banks(
    n_ids: usize,
    n_expr: usize,
    seed: u64,
) -> (Vec<[f64; 6]>, Vec<[f64; 4]>) {
    let mut rng = ChaCha20Rng::seed_from_u64(crate::nn::derive_seed(seed, "synth-data"));
    let ids: Vec<[f64; 6]> = (0..n_ids)
        .map(|_| {
            let mut v = [0.0; 6];
            for x in &mut v {
                *x = rng.random_range(-0.9..0.9);
            }
            v
        })
        .collect();
    let exprs: Vec<[f64; 4]> = (0..n_expr)
        .map(|_| {
            [
                rng.random_range(0.0..1.0),
                rng.random_range(-0.8..0.8),
                rng.random_range(-0.8..0.8),
                rng.random_range(0.3..1.0),
            ]
        })
        .collect();
    (ids, exprs)
}

/// Write a full factorial synthetic dataset to `out_root` and return its
/// index. Deterministic per seed: identical arguments produce byte-identical
/// trees. `n_test` identities (default about a quarter, at least one) form
/// the held-out split.
pub fn generate_synthetic_dataset(
    n_ids: usize,
    n_expr: usize,
    n_poses: usize,
    resolution: usize,
    seed: u64,
    out_root: &Path,
    n_test: Option<usize>,
) -> Result<DatasetIndex> {
    if n_ids == 0 || n_expr == 0 || n_poses == 0 {
        return Err(Error::Config("dataset dimensions must be nonzero".into()));
    }
    let n_test = n_test.unwrap_or_else(|| (n_ids / 4).max(1));
    if n_test >= n_ids {
        return Err(Error::Config(format!(
            "test identities {n_test} must be fewer than total {n_ids}"
        )));
    }
    let (id_bank, expr_bank) = parameter_banks(n_ids, n_expr, seed);
    let poses = pose_grid(n_poses);

    let identities: Vec<String> = (0..n_ids).map(|i| format!("id{i:03}")).collect();
    let expressions: Vec<String> = (0..n_expr).map(|i| format!("expr{i:02}")).collect();
    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        identities: identities.clone(),
        train: identities[..n_ids - n_test].to_vec(),
        test: identities[n_ids - n_test..].to_vec(),
        expressions: expressions.clone(),
        poses: poses.clone(),
    };

    std::fs::create_dir_all(out_root)?;
    let manifest_text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Parse(format!("serializing manifest: {e}")))?;
    std::fs::write(out_root.join("identities.json"), manifest_text)?;

    for (id_idx, id_name) in identities.iter().enumerate() {
        let img_dir = out_root.join("images").join(id_name);
        let lm_dir = out_root.join("landmarks").join(id_name);
        std::fs::create_dir_all(&img_dir)?;
        std::fs::create_dir_all(&lm_dir)?;
        for (ex_idx, ex_name) in expressions.iter().enumerate() {
            for (p_idx, &yaw) in poses.iter().enumerate() {
                let params = SynthFaceParams {
                    identity: id_bank[id_idx],
                    expression: expr_bank[ex_idx],
                    yaw,
                };
                let lms = synth_landmarks(&params)?;
                let face = render_synthetic_face(&params, resolution)?;
                let stem = format!("{ex_name}_{p_idx}");
                let pixel_points: Vec<[f64; 2]> = lms
                    .points
                    .iter()
                    .map(|p| [p[0] * resolution as f64, p[1] * resolution as f64])
                    .collect();
                LandmarkSet::save_raw(&pixel_points, &lm_dir.join(format!("{stem}.json")))?;
                face.save_png(&img_dir.join(format!("{stem}.png")))?;
            }
        }
    }
    ingest_dataset(out_root)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_round_trip_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let index =
            generate_synthetic_dataset(2, 8, 5, 32, 99, dir.path(), Some(1)).unwrap();
        assert_eq!(index.records.len(), 80);
        let again = ingest_dataset(dir.path()).unwrap();
        assert_eq!(again.records.len(), 80);
        assert_eq!(again.train_identities, vec![0]);
        assert_eq!(again.test_identities, vec![1]);
        let loaded = LoadedDataset::load(again, 32).unwrap();
        assert_eq!(loaded.n_records(), 80);
        assert_eq!(loaded.pose_reference_candidates(0, 2).len(), 8);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_synthetic_dataset(2, 2, 2, 32, 7, a.path(), Some(1)).unwrap();
        generate_synthetic_dataset(2, 2, 2, 32, 7, b.path(), Some(1)).unwrap();
        for rel in [
            "identities.json",
            "images/id000/expr00_0.png",
            "images/id001/expr01_1.png",
            "landmarks/id000/expr01_0.json",
        ] {
            let fa = std::fs::read(a.path().join(rel)).unwrap();
            let fb = std::fs::read(b.path().join(rel)).unwrap();
            assert_eq!(fa, fb, "file {rel} differs between identical seeds");
        }
    }

    #[test]
    fn missing_landmark_file_is_named_in_error() {
        let dir = tempfile::tempdir().unwrap();
        generate_synthetic_dataset(2, 2, 2, 32, 3, dir.path(), Some(1)).unwrap();
        let victim = dir.path().join("landmarks/id001/expr00_1.json");
        std::fs::remove_file(&victim).unwrap();
        match ingest_dataset(dir.path()) {
            Err(Error::Ingest(msg)) => {
                assert!(msg.contains("expr00_1.json"), "message: {msg}")
            }
            other => panic!("expected IngestError, got {other:?}"),
        }
    }

    #[test]
    fn overlapping_split_rejected() {
        let dir = tempfile::tempdir().unwrap();
        generate_synthetic_dataset(2, 2, 2, 32, 4, dir.path(), Some(1)).unwrap();
        let mpath = dir.path().join("identities.json");
        let mut manifest: DatasetManifest =
            serde_json::from_str(&std::fs::read_to_string(&mpath).unwrap()).unwrap();
        manifest.test = manifest.identities.clone(); // now overlaps train
        std::fs::write(&mpath, serde_json::to_string(&manifest).unwrap()).unwrap();
        assert!(matches!(ingest_dataset(dir.path()), Err(Error::Split(_))));
    }

    #[test]
    fn malformed_landmark_json_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        generate_synthetic_dataset(2, 2, 2, 32, 5, dir.path(), Some(1)).unwrap();
        let victim = dir.path().join("landmarks/id000/expr00_0.json");
        std::fs::write(&victim, "[[1, 2], [3").unwrap();
        assert!(matches!(ingest_dataset(dir.path()), Err(Error::Parse(_))));
    }
}
