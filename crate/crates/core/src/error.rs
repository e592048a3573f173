use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller supplied a value outside the operation's contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A range constraint or parameter value that violates the registry bounds.
    #[error("parameter {parameter}: {message}")]
    Constraint { parameter: String, message: String },

    /// Evaluation left the model's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("simulation failed for sample {index}: {source}")]
    Simulation {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported schema version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    /// Model document inconsistent with itself (dims vs weights).
    #[error("layer {layer}: {message}")]
    Layer { layer: usize, message: String },

    #[error("training failed: {0}")]
    Training(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn constraint(parameter: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Constraint {
            parameter: parameter.into(),
            message: message.into(),
        }
    }

    /// Name of the offending parameter, when the error concerns one.
    pub fn parameter(&self) -> Option<&str> {
        match self {
            Error::Constraint { parameter, .. } => Some(parameter),
            Error::Simulation { source, .. } => source.parameter(),
            _ => None,
        }
    }

    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Constraint { .. } => "constraint",
            Error::Domain(_) => "domain",
            Error::Simulation { .. } => "simulation",
            Error::Parse { .. } => "parse",
            Error::Version { .. } => "version",
            Error::Layer { .. } => "layer",
            Error::Training(_) => "training",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
