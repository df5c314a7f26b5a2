use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("missing VGRID magic line")]
    BadMagic,

    #[error("malformed VGRID header: {0}")]
    MalformedHeader(String),

    #[error("unsupported dtype {0:?}")]
    UnsupportedDtype(String),

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },

    #[error("payload has {extra} trailing bytes")]
    TrailingBytes { extra: usize },

    #[error("invalid shape {0:?}: every extent must be positive")]
    InvalidShape([usize; 3]),

    #[error("data length {actual} does not match shape (expected {expected})")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite value at voxel index {0}")]
    NonFinite(usize),

    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch([usize; 3], [usize; 3]),

    #[error("volume is not binary (values outside {{0, 1}})")]
    NotBinary,

    #[error("value {value} at voxel index {index} outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f32 },

    #[error("voxel {0:?} lies outside the grid")]
    OutOfBounds([usize; 3]),

    #[error("operation requires a non-empty volume")]
    EmptyVolume,

    #[error("invalid direction: {0}")]
    InvalidDirection(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incompatible transforms: {0}")]
    IncompatibleEct(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    /// Stable machine-readable identifier, used in CLI error payloads.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::BadMagic => "bad_magic",
            Error::MalformedHeader(_) => "malformed_header",
            Error::UnsupportedDtype(_) => "unsupported_dtype",
            Error::TruncatedPayload { .. } => "truncated_payload",
            Error::TrailingBytes { .. } => "trailing_bytes",
            Error::InvalidShape(_) => "invalid_shape",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::ShapeMismatch(..) => "shape_mismatch",
            Error::NotBinary => "not_binary",
            Error::ValueOutOfRange { .. } => "value_out_of_range",
            Error::OutOfBounds(_) => "out_of_bounds",
            Error::EmptyVolume => "empty_volume",
            Error::InvalidDirection(_) => "invalid_direction",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::IncompatibleEct(_) => "incompatible_ect",
            Error::UndefinedMetric(_) => "undefined_metric",
            Error::Precondition(_) => "precondition",
        }
    }
}
