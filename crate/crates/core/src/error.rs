use std::path::PathBuf;

/// Errors raised by mesh construction, field generation, the solvers and case I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("case file {path}: {message}")]
    CaseSyntax { path: PathBuf, message: String },

    #[error("singular medium: {0}")]
    SingularMedium(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("linear solver breakdown: {0}")]
    Breakdown(String),

    #[error("time step {required:.3e} below minimum {minimum:.3e} (limiting cell {cell})")]
    TimeStepTooSmall {
        required: f64,
        minimum: f64,
        cell: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid value in field `{field}` at cell {cell}")]
    NonFinite { field: String, cell: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for the command-line tool: 1 for configuration
    /// problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::CaseSyntax { .. }
            | Error::Domain(_)
            | Error::Unsupported(_)
            | Error::Io(_)
            | Error::Csv(_) => 1,
            Error::SingularMedium(_)
            | Error::Breakdown(_)
            | Error::TimeStepTooSmall { .. }
            | Error::Numerical(_)
            | Error::NonFinite { .. } => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
