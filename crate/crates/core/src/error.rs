use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the lattice, steppers and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error(
        "fixed-point iteration did not converge after {iters} iterations (residual {residual:e})"
    )]
    NoConvergence { iters: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("path blew up at step {step} (norm {norm:e})")]
    Blowup { step: usize, norm: f64 },
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ (Error::AtStep { .. } | Error::Blowup { .. }) => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    /// Whether the error stems from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. } | Error::Numerical(_) | Error::Blowup { .. } => true,
            Error::AtStep { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<(), Error> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

/// Errors from the experiment harness: configuration, numerics and output.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error(transparent)]
    Numerics(#[from] Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        HarnessError::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
