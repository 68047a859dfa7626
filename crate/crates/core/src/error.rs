use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear solver failed for {system} after {iterations} iterations (final residual {final_residual:.3e})")]
    SolverFailure {
        system: &'static str,
        iterations: usize,
        final_residual: f64,
        residual_history: Vec<f64>,
    },

    #[error("CFL number {cfl:.3} exceeds the configured cap {cap:.3}")]
    CflExceeded { cfl: f64, cap: f64 },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("parameter {value} lies outside the training box [{lo}, {hi}]")]
    ExtrapolationRefused { value: f64, lo: f64, hi: f64 },

    #[error("schema error in {context}: {message}")]
    Schema { context: String, message: String },

    #[error("corrupt file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },

    #[error("observer failed: {0}")]
    Observer(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (schema, usage) rather than
    /// numerical or runtime failures.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Schema { .. } | Error::InvalidArgument(_))
    }
}
