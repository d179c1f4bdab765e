use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid exponent {0}: must be >= 1 or +inf")]
    InvalidExponent(f64),

    #[error("invalid cube: {0}")]
    InvalidCube(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("restriction cube {inner} exceeds grid extent {outer}")]
    RestrictionOutOfBounds { inner: String, outer: String },

    #[error("dimension mismatch: expected n = {expected}, got n = {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("lattice nodes {a} and {b} are closer than the gap {gap}")]
    LatticeSeparation { a: usize, b: usize, gap: f64 },

    #[error("grid truncates the support of lattice node {node}")]
    TruncatedSupport { node: usize },

    #[error("decay exponent {which} = {value} does not exceed the threshold {threshold}")]
    DecayExponent {
        which: &'static str,
        value: f64,
        threshold: f64,
    },

    #[error("signal is identically zero; the concentration ratio is undefined")]
    ZeroSignal,

    #[error("declared delta = {declared} but the signal needs delta >= {required}")]
    DeltaInconsistent { declared: f64, required: f64 },

    #[error("theta = {theta} is smaller than the covering gap {gap}")]
    UncoverableCube { theta: f64, gap: f64 },

    #[error("contraction factor gamma = {0} is not below 1")]
    NotContractive(f64),

    #[error(
        "iteration stopped contracting after {iterations} steps (gamma_theory = {gamma_theory})"
    )]
    IterationDiverged {
        gamma_theory: f64,
        iterations: usize,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    #[error("malformed signal file: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
