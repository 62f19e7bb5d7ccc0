use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested combination of options is not defined.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A projected sweep reached a step whose allowed manifold is empty.
    #[error("empty allowed manifold at step {step} (theta = {theta})")]
    EmptyKernel { step: usize, theta: f64 },

    /// The iterative solver ran out of backtracking budget.
    #[error("iterative solver gave up after {attempts} attempts")]
    SolverExhausted { attempts: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
