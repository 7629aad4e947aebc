use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("variable {name}: invalid bounds [{lower}, {upper}]")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("duplicate name {0}")]
    DuplicateName(String),
    #[error("unknown variable: {0}")]
    UnknownVariable(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("solution status is {0}, not optimal")]
    NotOptimal(String),
    #[error("solution has {got} entries, model has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("LP file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid name {0:?}: only [A-Za-z0-9_] allowed, not starting with a digit")]
    InvalidName(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type SolverResult<T> = Result<T, SolverError>;
