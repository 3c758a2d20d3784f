use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),

    #[error("expected {expected} data for this class, got {got}")]
    SampleSize { expected: usize, got: usize },

    #[error("datum kind does not match model class {0}")]
    DatumMismatch(&'static str),

    #[error("invalid parameters for {class}: {reason}")]
    InvalidParameters { class: &'static str, reason: &'static str },

    #[error("empty input")]
    EmptyInput,

    #[error("fewer than {needed} points reachable within two hops of point {seed}")]
    InsufficientNeighborhood { seed: usize, needed: usize },

    #[error("cannot draw {m} distinct indices from {n}")]
    SampleLargerThanPopulation { m: usize, n: usize },

    #[error("no model found after {samples_drawn} samples")]
    NoModelFound { samples_drawn: u64 },

    #[error("min-hash signatures were built with different hash families")]
    SignatureMismatch,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch at line {line}: expected {expected} columns, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
