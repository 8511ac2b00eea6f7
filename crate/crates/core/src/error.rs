use thiserror::Error;

/// Errors raised by the solver laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, dimensions, or names that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    /// A non-finite value appeared during a computation.
    #[error("numeric error in {op} (node {index})")]
    NonFinite { op: String, index: usize },

    /// Training diverged; the last finite parameters are kept by the caller.
    #[error("non-finite {what} at iteration {iteration}")]
    Diverged { what: String, iteration: usize },

    #[error("argument outside the domain of {function}: {value}")]
    Domain { function: &'static str, value: f64 },

    #[error("unknown problem `{name}` (expected one of: {valid})")]
    UnknownProblem { name: String, valid: String },

    #[error("relative L2 undefined: reference values are all zero")]
    UndefinedMetric,

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("missing test set: {0}")]
    MissingTestSet(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
