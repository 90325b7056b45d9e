//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by cloud construction, indexing, sampling, and gathering.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("invalid coordinate at point {index}")]
    InvalidCoordinate { index: usize },

    #[error("out of bounds: point ({x}, {y}, {z}) outside the index cube")]
    OutOfBounds { x: f64, y: f64, z: f64 },

    #[error("depth exceeds code width: depth {depth} > {max}")]
    DepthExceedsCodeWidth { depth: u8, max: u8 },

    #[error("incomparable codes: depth {a} vs {b}")]
    IncomparableCodes { a: u8, b: u8 },

    #[error("cloud exhausted")]
    CloudExhausted,

    #[error("sample larger than cloud: K={k} > N={n}")]
    SampleLargerThanCloud { k: usize, n: usize },

    #[error("not enough points: need {needed}, cloud has {available}")]
    NotEnoughPoints { needed: usize, available: usize },

    #[error("empty gather width")]
    EmptyGatherWidth,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("truncated record: {len} bytes is not a multiple of {stride}")]
    TruncatedRecord { len: u64, stride: u64 },

    #[error("parse error at line {line}: {message}")]
    ParseLine { line: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("unsupported container: {0}")]
    BadContainer(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
