use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("stream truncated inside frame {frame}")]
    Truncated { frame: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("insufficient frames: need {required}, have {available}")]
    InsufficientFrames { required: usize, available: usize },
    #[error("degenerate scene: {0}")]
    DegenerateScene(String),
    #[error("tracking failure: {0}")]
    TrackingFailure(String),
    #[error("under-determined fit: {0}")]
    UnderDetermined(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("video {video} has {count} rating(s), at least 2 required")]
    InsufficientRatings { video: String, count: usize },
    #[error("every subject was rejected during cleaning")]
    EmptyAfterCleaning,
    #[error("frame {frame} samples outside the base image; enlarge the base or reduce the motion")]
    Margin { frame: usize },
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: impl std::fmt::Display, got: impl std::fmt::Display) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// True for errors caused by content with nothing to measure (flat frames,
    /// untrackable motion).
    pub fn is_degenerate_content(&self) -> bool {
        matches!(
            self,
            Error::DegenerateScene(_) | Error::TrackingFailure(_) | Error::UnderDetermined(_)
        )
    }
}
