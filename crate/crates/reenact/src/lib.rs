//! Landmark-guided face reenactment.
//!
//! Given a source face and a driving face's landmarks, the pipeline produces
//! a face with the source identity and the driving expression and pose. It
//! runs three separately trained stages:
//!
//! 1. a landmark transformer that retargets driving landmark images to the
//!    source identity by predicting an additive landmark-image shift,
//! 2. a face rotation module that turns the source face to the driving pose,
//!    conditioned on a pose feature from the transformed landmark image,
//! 3. an expression enhancing generator that restores detail and imposes the
//!    driving expression through AdaIN-modulated residual blocks.
//!
//! Everything runs on CPU in f64 with seeded determinism: a synthetic
//! parametric face dataset provides exact ground truth for every
//! (identity, expression, pose) combination, and the evaluation module
//! implements SSIM and FID from scratch.

pub mod autodiff;
pub mod error;
pub mod img;
pub mod landmarks;
pub mod dataset;
pub mod expression;
pub mod nn;
pub mod rotation;
pub mod transformer;

pub use error::{Error, Result};
