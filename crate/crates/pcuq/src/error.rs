//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by basis construction, quadrature, projection, and the
/// file protocol.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("basis for dim {dim}, order {order} overflows the term count")]
    BasisSizeOverflow { dim: usize, order: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature rule requires at least one point per dimension")]
    EmptyQuadrature,

    #[error("tensor grid of {0} requested points per dimension overflows the node count")]
    GridSizeOverflow(String),

    #[error("evaluation table has {rows} rows but the rule has {nodes} nodes")]
    RowCountMismatch { rows: usize, nodes: usize },

    #[error("evaluation table was built against a different quadrature rule")]
    RuleMismatch,

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("log transform requires strictly positive outputs; found {value} at row {row}, column {col}")]
    NonPositiveOutput { row: usize, col: usize, value: f64 },

    #[error("relative L2 error undefined: output '{label}' is identically zero on the validation grid")]
    ZeroDenominator { label: String },

    #[error("moments of a log-transformed surrogate are not available from coefficients; sample the surrogate instead")]
    MomentsOfLogSurrogate,

    #[error("sensitivity indices of a log-transformed surrogate are indices of the log, not of the quantity; project without the log transform")]
    SensitivityOfLogSurrogate,

    #[error("input distribution for dimension {dim} does not match the basis family")]
    SamplerFamilyMismatch { dim: usize },

    #[error("sample count must be at least 1")]
    EmptySample,

    #[error("degenerate sample: fewer than two distinct values")]
    DegenerateSample,

    #[error("quantile {0} outside the open interval (0, 1)")]
    QuantileOutOfRange(f64),

    #[error("design dimension {dim} out of range for a {total}-dimensional surrogate")]
    DesignDimOutOfRange { dim: usize, total: usize },

    #[error("design problem requires a scalar-output surrogate; got {0} outputs")]
    DesignNeedsScalarOutput(usize),

    #[error("design map standard deviation must be positive; got {0}")]
    NonPositiveScale(f64),

    #[error("search interval does not bracket the target: failure probability is {p_lo} at {lo} and {p_hi} at {hi}, target {target}")]
    NonBracketingInterval {
        lo: f64,
        hi: f64,
        p_lo: f64,
        p_hi: f64,
        target: f64,
    },

    #[error("parameter '{name}' has invalid distribution: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("model parameter {index} must be positive; got {value}")]
    NonPositiveModelParameter { index: usize, value: f64 },

    #[error("time series is empty")]
    EmptyTimeSeries,

    #[error("time labels must be strictly increasing")]
    NonMonotoneTimes,

    #[error("results file: {0}")]
    Protocol(String),

    #[error("archive: {0}")]
    Archive(String),

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
