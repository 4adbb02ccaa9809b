use thiserror::Error;

use crate::SampleId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("duplicate sample id {0}")]
    DuplicateId(SampleId),

    #[error("unknown sample id {0}")]
    UnknownId(SampleId),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },

    #[error("requested {k} items from a set of {n}")]
    TooMany { k: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bandwidth undefined: all pairwise distances are zero")]
    DegenerateBandwidth,

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("participation vector has no entry above the positivity threshold")]
    DegenerateParticipation,

    #[error("label {label} out of range for {classes} classes (sample {id})")]
    LabelOutOfRange { id: SampleId, label: i64, classes: usize },

    #[error("insufficient samples of class {class}: need {needed}, have {available}")]
    InsufficientClass { class: usize, needed: usize, available: usize },

    #[error("score id sets differ")]
    IdMismatch,

    #[error("center placement failed after {attempts} attempts")]
    PlacementFailed { attempts: usize },

    #[error("{0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
