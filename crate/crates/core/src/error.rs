use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("jet domain error: {0}")]
    JetDomain(String),
    #[error("dynamics domain error: {0}")]
    Domain(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("eigen-solver did not converge: {0}")]
    Solver(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Failure category reported by the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Config,
    Integration,
    Solver,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Integration => 3,
            Category::Solver => 4,
            Category::Io => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Integration => "integration",
            Category::Solver => "solver",
            Category::Io => "io",
        }
    }
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Invalid(_) | Error::Parse(_) => {
                Category::Config
            }
            Error::Integration(_) | Error::Domain(_) | Error::JetDomain(_) | Error::NonFinite(_) => {
                Category::Integration
            }
            Error::Solver(_) | Error::Dimension(_) => Category::Solver,
            Error::Io(_) => Category::Io,
        }
    }
}
