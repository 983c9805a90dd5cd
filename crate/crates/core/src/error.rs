use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("linear solver failed: {message} (relative residual {residual:.3e})")]
    Solver { message: String, residual: f64 },

    #[error("generalized eigenproblem failed: {0}")]
    Pencil(String),

    #[error("coverage failure: {0}")]
    Coverage(String),

    #[error("multiscale space construction failed: {0}")]
    Space(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True when the root cause is a configuration problem rather than a
    /// numerical one.
    pub fn is_config(&self) -> bool {
        matches!(self.root_cause(), Error::Config { .. })
    }

    /// The innermost error below any context and step wrappers.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::Context { source, .. } | Error::Step { source, .. } => source.root_cause(),
            e => e,
        }
    }
}
