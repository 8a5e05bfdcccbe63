use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    EmptyTensor,
    NonFinite,
    /// Quantized value outside `[q_min, q_max]`.
    OutOfRange { value: i32, q_min: i32, q_max: i32 },
    /// Quantization parameters requested for the identity (f32) level.
    IdentityLevel,
    /// Map with no positive mass, cannot be turned into a distribution.
    DegenerateMap,
    /// Map with zero variance, correlation undefined.
    ConstantMap,
    NegativeValue,
    DimensionMismatch { left: (usize, usize), right: (usize, usize) },
    InvalidShape { height: usize, width: usize, len: usize },
    InvalidEpsilon,
    UnknownArchitecture,
    UnknownPrecision,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyTensor => f.write_str("empty tensor"),
            Error::NonFinite => f.write_str("non-finite input"),
            Error::OutOfRange { value, q_min, q_max } => write!(
                f,
                "quantized value out of range: {value} not in [{q_min}, {q_max}]"
            ),
            Error::IdentityLevel => f.write_str("f32 is the identity level and has no quantization parameters"),
            Error::DegenerateMap => f.write_str("degenerate map"),
            Error::ConstantMap => f.write_str("constant map"),
            Error::NegativeValue => f.write_str("negative value in a map that must be non-negative"),
            Error::DimensionMismatch { left, right } => write!(
                f,
                "dimension mismatch: {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::InvalidShape { height, width, len } => write!(
                f,
                "invalid grid shape {height}x{width} for {len} values"
            ),
            Error::InvalidEpsilon => f.write_str("epsilon must be finite and > 0"),
            Error::UnknownArchitecture => f.write_str("unsupported model"),
            Error::UnknownPrecision => f.write_str("unknown precision level"),
        }
    }
}

impl core::error::Error for Error {}
