use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: [usize; 4],
        right: [usize; 4],
    },

    #[error("expected {expected} channel(s), got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("image too small: {0}")]
    TooSmall(String),

    #[error("invalid architecture: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("training diverged: non-finite {component} at step {step}")]
    Diverged { component: String, step: u64 },

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

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

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used as the CLI error prefix.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } | Error::ChannelMismatch { .. } => "shape",
            Error::InvalidImage(_) | Error::TooSmall(_) => "image",
            Error::NonFinite(_) => "non-finite",
            Error::InvalidSpec(_) => "spec",
            Error::InvalidConfig(_) => "config",
            Error::Dataset(_) => "dataset",
            Error::Diverged { .. } => "diverged",
            Error::CheckpointVersion { .. } | Error::CorruptCheckpoint(_) => "checkpoint",
            Error::Io { .. } => "io",
            Error::Image { .. } => "image-io",
        }
    }
}
