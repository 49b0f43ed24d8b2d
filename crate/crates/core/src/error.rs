use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("division by an interval containing zero: [{lo}, {hi}]")]
    DivisionByIntervalContainingZero { lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("box of dimension {dim} has 2^{dim} vertices, above the cap of 2^{cap}")]
    VertexBudgetExceeded { dim: usize, cap: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("shape mismatch in layer {layer}: {detail}")]
    ShapeMismatch { layer: usize, detail: String },

    #[error("unsupported activation: {0}")]
    UnsupportedActivation(String),

    #[error("{activation} does not provide derivative enclosures of order {order}")]
    UnsupportedDerivativeOrder { activation: String, order: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("coefficient enclosure failed: {0}")]
    CoefficientEnclosure(String),

    #[error("cell has zero error bound and cannot be refined")]
    ZeroErrorCell,

    #[error("refinement would create {requested} cells from one box (limit {limit})")]
    RefinementTooFine { requested: u128, limit: usize },

    #[error("evaluator failure: {0}")]
    Evaluator(String),

    #[error("invalid value for `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub(crate) fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}
