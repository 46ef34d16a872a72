use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller supplied a value outside the operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration is self-inconsistent or violates a structural requirement.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A configuration key failed validation; `key` is the dotted path.
    #[error("config key `{key}`: {message}")]
    ConfigKey { key: String, message: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    /// Right-hand side of the periodic Poisson problem is not neutral.
    #[error("Poisson right-hand side is not neutral: sum(dx * (C0 - 1)) = {defect:e}")]
    Solvability { defect: f64 },

    /// A linear factorization hit an exactly singular pivot.
    #[error("singular system: {0}")]
    Singular(String),

    #[error("linear solve failed for operator {key}: {reason}")]
    Solver { key: String, reason: String },

    /// The trajectory left the finite range (blow-up).
    #[error("solution diverged at step {step} (t = {t}): norm {norm:e}")]
    Diverged { step: usize, t: f64, norm: f64 },

    #[error("observer failed at step {step}: {source}")]
    Observer {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short category name used by the CLI for its exit status.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "input",
            Error::Config(_) | Error::ConfigKey { .. } | Error::ConfigParse(_) => "config",
            Error::Solvability { .. } | Error::Singular(_) | Error::Solver { .. } => "solver",
            Error::Diverged { .. } => "diverged",
            Error::Observer { .. } => "observer",
            Error::Io { .. } | Error::Csv(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" | "input" => 2,
            "io" => 3,
            "solver" => 4,
            "diverged" => 5,
            _ => 1,
        }
    }
}
