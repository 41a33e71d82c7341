use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("index {index} out of range 1..={size} in mode {mode}")]
    Range { mode: usize, index: usize, size: usize },

    #[error("capacity error: {requested} elements exceed the budget of {budget}")]
    Capacity { requested: u128, budget: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("plan error: {0}")]
    Plan(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integrity error: dummy-channel weight {value:e} at {location} exceeds {threshold:e}")]
    Integrity {
        location: String,
        value: f64,
        threshold: f64,
    },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation failed:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("corrupted model file: {0}")]
    Corruption(String),

    #[error("unsupported model file version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("layer {layer}: {source}")]
    Layer {
        layer: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Multiple(Vec<Error>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_layer(self, layer: &str) -> Self {
        Error::Layer {
            layer: layer.to_string(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input (as opposed to numerical or
    /// data failures discovered while computing).
    pub fn is_usage(&self) -> bool {
        match self {
            Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::Plan(_) => true,
            Error::Layer { source, .. } => source.is_usage(),
            Error::Multiple(errs) => errs.iter().all(Error::is_usage),
            _ => false,
        }
    }
}
