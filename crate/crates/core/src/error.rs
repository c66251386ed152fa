use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("unsupported dpi {0}; expected one of 100, 150, 200, 300")]
    UnsupportedDpi(u32),
    #[error("image dpi {actual} does not match expected {expected}")]
    DpiMismatch { expected: u32, actual: u32 },
    #[error("target dpi {target} exceeds base dpi {base}")]
    UpsampleNotAllowed { base: u32, target: u32 },
    #[error("region {0} lies outside the page")]
    RegionOutOfBounds(String),
    #[error("region {id} has class {class}, expected raster_image")]
    WrongRegionClass { id: String, class: String },
    #[error("invalid region {id}: {reason}")]
    InvalidRegion { id: String, reason: String },

    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),
    #[error("map {width}x{height} holds no full {tile}x{tile} tile")]
    MapTooSmall { width: usize, height: usize, tile: usize },
    #[error("image {width}x{height} is smaller than the required {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },

    #[error("invalid noise parameter: {0}")]
    InvalidNoiseParameter(String),
    #[error("target mean SSIM {target} unreachable: strongest noise still gives {achieved}")]
    TargetUnreachable { target: f64, achieved: f64 },

    #[error("feature {0} has zero variance in the training data")]
    DegenerateFeature(usize),
    #[error("training data contains a single class")]
    SingleClassError,
    #[error("non-finite feature value: {0}")]
    InvalidFeature(String),
    #[error("invalid selection dimension {requested}; expected 1..={available}")]
    InvalidDimension { requested: usize, available: usize },

    #[error("too few samples: {n} samples for {k} folds")]
    TooFewSamples { n: usize, k: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionError { found: String, expected: String },
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("io error on {path}: {source}")]
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
}

pub type Result<T> = std::result::Result<T, Error>;
