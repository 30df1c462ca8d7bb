use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not symmetric (entry ({row}, {col}) differs by {diff})")]
    NonSymmetric { row: usize, col: usize, diff: f64 },

    #[error("column {0} is constant")]
    ConstantColumn(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("shrinkage failed: eigenvalue floor {floor} unreachable")]
    ShrinkageFailed { floor: f64 },

    #[error("too few observations: n = {n} but q + 1 = {needed}")]
    TooFewObservations { n: usize, needed: usize },

    #[error("insufficient length: need at least {needed} observations, got {got}")]
    InsufficientLength { needed: usize, got: usize },

    #[error("empty data")]
    EmptyData,

    #[error("empty epsilon grid")]
    EmptyGrid,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed CSV at row {row}, column {col}: {msg}")]
    MalformedCsv { row: usize, col: usize, msg: String },

    #[error("unknown transform code {code:?} for series {series}")]
    UnknownTcode { series: String, code: String },

    #[error("non-positive value {value} at index {index} where a logarithm is required")]
    NonPositiveForLog { index: usize, value: f64 },

    #[error("non-positive CPI value {value} at index {index}")]
    NonPositiveCpi { index: usize, value: f64 },

    #[error("insufficient history: {months} months, need at least {needed}")]
    InsufficientHistory { months: usize, needed: usize },

    #[error("series {0} not found")]
    MissingSeries(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
