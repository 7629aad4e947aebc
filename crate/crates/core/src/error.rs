use evagg_solver::SolverError;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("{0}")]
    Validation(String),
    /// A built or decoded model broke one of its defining relations.
    #[error("[{tag}] {msg}")]
    Invariant { tag: String, msg: String },
    #[error("{model} model not solved: {status}{}", diagnosis.as_deref().map(|d| format!(" ({d})")).unwrap_or_default())]
    NotSolved { model: String, status: String, diagnosis: Option<String> },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CoreError {
    pub(crate) fn invariant(tag: impl Into<String>, msg: impl Into<String>) -> Self {
        CoreError::Invariant { tag: tag.into(), msg: msg.into() }
    }

    /// Validation errors are the caller's fault; everything else is a
    /// failure to solve or write.
    pub fn is_validation(&self) -> bool {
        matches!(self, CoreError::Validation(_))
    }
}

pub type CoreResult<T> = Result<T, CoreError>;
