use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chromaticity ({x}, {y})")]
    InvalidChromaticity { x: f64, y: f64 },

    #[error("degenerate gamut {0}: {1}")]
    Geometry(String, String),

    #[error("undefined chromaticity for zero tristimulus sum")]
    UndefinedChromaticity,

    #[error("encoding mismatch: expected {expected}, found {found}")]
    EncodingMismatch { expected: String, found: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown gamut {0:?}")]
    UnknownGamut(String),

    #[error("mapping produced negative component {value:e} at pixel {pixel}")]
    NegativeComponent { pixel: usize, value: f64 },

    #[error("white points differ between {0} and {1}")]
    WhiteMismatch(String, String),

    #[error("target gamuts are not nested: {0}")]
    NotNested(String),

    #[error("unsupported dimension {0} (only 1 or 2 supported)")]
    UnsupportedDimension(usize),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("continued fraction did not converge for a={a}, b={b}, x={x}")]
    NoConvergence { a: f64, b: f64, x: f64 },

    #[error("unsupported image format in {path}: {reason}")]
    UnsupportedImage { path: PathBuf, reason: String },

    #[error("image codec error for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("i/o error for {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
