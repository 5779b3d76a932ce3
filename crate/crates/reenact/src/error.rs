use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps variants onto exit codes: configuration problems exit 2,
/// data problems exit 3, checkpoint dependency/version problems exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate landmark set: {0}")]
    DegenerateLandmarks(String),
    #[error("resolution {0} too small (minimum 16)")]
    ResolutionTooSmall(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),
    #[error("pose {0} outside [-1, 1]")]
    PoseOutOfRange(f64),
    #[error("no pose reference candidates: {0}")]
    NoPoseReference(String),
    #[error("missing ground-truth pairing: {0}")]
    Pairing(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("ingest error: {0}")]
    Ingest(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("train/test split error: {0}")]
    Split(String),
    #[error("missing stage dependency: {0}")]
    Dependency(String),
    #[error("checkpoint version mismatch: {0}")]
    Version(String),
    #[error("window larger than image: {0}")]
    WindowTooLarge(String),
    #[error("non-finite features: {0}")]
    Feature(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code for the CLI: 2 config, 3 data, 4 dependency/version, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Config(_) | ParamOutOfRange(_) | PoseOutOfRange(_) | ResolutionTooSmall(_)
            | WindowTooLarge(_) => 2,
            DegenerateLandmarks(_) | ShapeMismatch(_) | NoPoseReference(_) | Pairing(_)
            | Ingest(_) | Parse(_) | Split(_) | Io(_) => 3,
            Dependency(_) | Version(_) => 4,
            Feature(_) | Numerical(_) => 1,
        }
    }
}
