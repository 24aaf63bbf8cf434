use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HtrError>;

#[derive(Debug, Error)]
pub enum HtrError {
    #[error("out of bounds: {0}")]
    Bounds(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("blank line: no foreground pixels")]
    BlankLine,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("target of length {target_len} needs at least {required} timesteps, matrix has {timesteps}")]
    InfeasibleTarget {
        target_len: usize,
        required: usize,
        timesteps: usize,
    },

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: u32,
        column: u32,
        message: String,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("bad container format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl HtrError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HtrError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command line: 1 for usage and configuration
    /// problems, 2 for problems with the data being processed.
    pub fn exit_code(&self) -> i32 {
        match self {
            HtrError::Config(_) => 1,
            _ => 2,
        }
    }
}
