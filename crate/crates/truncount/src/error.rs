use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular or non-positive-definite information matrix (iteration {0})")]
    Singular(usize),

    #[error("fit did not converge after {0} iterations")]
    NonConvergence(usize),

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("undefined estimator: {0}")]
    UndefinedEstimator(String),

    #[error("model selection failed: {0}")]
    Selection(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Process exit code for the CLI contract: 2 for input/validation
    /// problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_)
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::InsufficientData(_)
            | Error::Config(_) => 2,
            Error::Singular(_)
            | Error::NonConvergence(_)
            | Error::Overflow(_)
            | Error::UndefinedEstimator(_)
            | Error::Selection(_) => 3,
        }
    }
}
