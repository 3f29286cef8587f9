use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index} after jitter)")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("no activation has p(a) in [{p_low}, {p_high}]")]
    EmptyWindow { p_low: f64, p_high: f64 },

    #[error("frustration needs at least two known concepts, got {0}")]
    TooFewConcepts(usize),

    #[error("reference covariance has zero Frobenius norm")]
    ZeroReference,

    #[error("point at the origin has no surface direction")]
    DegeneratePoint,

    #[error("invalid pair assignment for unknown concept {unknown}: ({i}, {j})")]
    InvalidAssignment { unknown: usize, i: usize, j: usize },

    #[error("residual variance T4 + sigma_y^2 = {0:e} is not positive")]
    DegenerateDenominator(f64),

    #[error("all paired differences are zero")]
    AllZeroDifferences,

    #[error("{path}:{line}: malformed header: {reason}")]
    MalformedHeader {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}:{line}: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}:{line}: label {value} is not 0 or 1")]
    NonBinaryLabel {
        path: PathBuf,
        line: usize,
        value: String,
    },

    #[error("class {class} has {count} members, fewer than {folds} folds")]
    TooFewPerClass {
        class: u8,
        count: usize,
        folds: usize,
    },

    #[error("dataset has {0} concept columns, need at least 3")]
    TooFewConceptColumns(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
