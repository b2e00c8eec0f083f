use std::path::PathBuf;

/// Errors raised anywhere in the identification pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration: bad parameter dimension, singular prior,
    /// mismatched noise regime, inconsistent sampler settings.
    #[error("configuration error: {0}")]
    Config(String),

    /// Parameters outside the domain where a model is defined
    /// (for example a zero Young's modulus with a positive yield stress).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed to produce a usable value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A measurement or chain file could not be parsed.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Numerical(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
