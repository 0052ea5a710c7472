use thiserror::Error;

pub type RnmResult<T> = Result<T, RnmError>;

/// Unified error type for the whole toolkit.
///
/// Variants are split along one load-bearing line: [`RnmError::is_input_error`]
/// distinguishes malformed or inconsistent inputs (a caller problem, CLI exit
/// code 2) from violated mathematical guarantees discovered while computing
/// (CLI exit code 1).
#[derive(Debug, Error)]
pub enum RnmError {
    #[error("invalid base space: {0}")]
    InvalidBase(String),
    #[error("invalid sample space: {0}")]
    InvalidSpace(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("empty family passed to {0}")]
    EmptyFamily(&'static str),
    #[error("operands live over different bases")]
    MixedBases,
    #[error("operands live over different sample spaces")]
    MixedSpaces,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("set is not measurable: {0}")]
    NotMeasurable(String),
    #[error("signed measure passed to {0}, which needs a nonnegative one")]
    SignedMeasure(&'static str),
    #[error("incompatible sigma-algebras: {0}")]
    IncompatibleSigma(String),
    #[error("absolute continuity fails: {0}")]
    NotAbsContinuous(String),
    #[error("space too large: {0}")]
    SpaceTooLarge(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("radius below grid resolution: {0}")]
    RadiusBelowResolution(String),
    #[error("input sequence does not converge to the declared limit: {0}")]
    NonConvergent(String),
    #[error("invariant violated: {0}")]
    InvariantViolated(String),
    #[error("schema violation in {path}: {detail}")]
    Schema { path: String, detail: String },
    #[error("cross-file mismatch: {0}")]
    CrossRef(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl RnmError {
    /// True when the error describes bad input rather than a broken guarantee.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, RnmError::InvariantViolated(_))
    }
}
