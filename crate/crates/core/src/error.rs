//! Crate-wide error type.

use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter `{name}` out of range: {value}")]
    ParameterOutOfRange { name: &'static str, value: f64 },

    #[error("latent vector must contain at least one component")]
    EmptyVector,

    #[error("non-finite component at index {index}")]
    NonFinite { index: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("endpoints are antipodal (angle {angle:.9} rad); great-circle path is not unique")]
    AntipodalEndpoints { angle: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("attribute `{attribute}` has no {class} samples")]
    EmptyClass {
        attribute: String,
        class: &'static str,
    },

    #[error("contingency cell ({cell}) is empty")]
    EmptyCell { cell: String },

    #[error("labels contain a single class; both positives and negatives are required")]
    SingleClass,

    #[error("k = {k} exceeds dataset size {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("decoder needs h*w >= latent dim ({pixels} < {dim})")]
    RankDeficient { pixels: usize, dim: usize },

    #[error("infeasible proportions: {0}")]
    InfeasibleProportions(String),

    #[error("codec unavailable: {0}")]
    CodecUnavailable(String),

    #[error("codec protocol error: {0}")]
    CodecProtocol(String),

    #[error("feature transform failed: {0}")]
    TransformFailure(String),

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("png encoding failed: {0}")]
    Png(#[from] png::EncodingError),
}

impl Error {
    /// True for errors that originate from a codec (toy or external).
    pub fn is_codec(&self) -> bool {
        matches!(self, Error::CodecUnavailable(_) | Error::CodecProtocol(_))
    }
}
