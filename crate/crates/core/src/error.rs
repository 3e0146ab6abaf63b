use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("score matrix contains non-finite entries")]
    NonFiniteScores,
    #[error("ground-truth correspondence matrix is all zeros")]
    EmptyGroundTruth,
    #[error("only {found} correspondences kept, at least 3 are required")]
    InsufficientCorrespondences { found: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh has no valid faces")]
    EmptyMesh,
    #[error("no records to aggregate")]
    EmptyRecords,
    #[error("missing field: {0}")]
    MissingField(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
