use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("antenna index {index} out of range for {count} antennas")]
    AntennaIndex { index: usize, count: usize },

    #[error("signal length {got} does not match {expected} antennas")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid value for `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("line {line}: key `{key}`: {reason}")]
    ParseKey {
        line: usize,
        key: String,
        reason: String,
    },

    #[error("missing required key `{0}`")]
    MissingKey(String),

    #[error("residual is not finite at the starting point ({x}, {y})")]
    NonFiniteResidual { x: f64, y: f64 },

    #[error("damped normal system is singular")]
    SingularSystem,

    #[error("amplitude baseline needs at least 3 antennas, got {0}")]
    TooFewAntennas(usize),

    #[error("csv: {0}")]
    Csv(String),
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line() as usize);
        match line {
            Some(line) => Error::Parse {
                line,
                reason: err.to_string(),
            },
            None => Error::Csv(err.to_string()),
        }
    }
}
