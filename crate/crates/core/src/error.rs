use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("image dimensions {width}x{height} below the minimum of {min}")]
    DimensionsTooSmall { width: usize, height: usize, min: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("coefficient magnitude {magnitude} at index {index} is not below 1")]
    NotQuasiConformal { index: usize, magnitude: f64 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("contour not simple: {0}")]
    ContourNotSimple(String),

    #[error("contour has too few points ({got}, need at least {min})")]
    ContourTooShort { got: usize, min: usize },

    #[error("circle map not monotone at angle {angle}")]
    NotMonotone { angle: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unknown synthetic kind '{0}' (valid kinds: {kinds})", kinds = crate::imaging::SynthKind::NAMES.join(", "))]
    UnknownKind(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
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

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
