use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty shape")]
    EmptyShape,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {0} (only 2 and 3 are supported)")]
    UnsupportedDimension(usize),
    #[error("cloud too small: need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate pair: points coincide")]
    DegeneratePair,
    #[error("inside invalid region: |x| = {norm} < k = {k}")]
    InsideInvalidRegion { norm: f64, k: f64 },
    #[error("invalid transform point: |x| = {norm} < k = {k}")]
    InvalidTransformPoint { norm: f64, k: f64 },
    #[error("gradient undefined at coincident points")]
    CoincidentPoints,
    #[error("translation, not rotation: planes are parallel")]
    ParallelPlanes,
    #[error("normals required for along-normal noise")]
    MissingNormals,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown shape kind `{0}`")]
    UnknownShape(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("empty data")]
    EmptyData,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
