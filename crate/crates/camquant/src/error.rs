use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] camquant_core::Error),

    #[error("tensor error: {0}")]
    Tensor(#[from] candle_core::Error),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error at {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("pretrained weights not found for {model} in {dir}")]
    WeightsNotFound { model: String, dir: PathBuf },

    #[error("weight tensor {name}: {reason}")]
    BadWeights { name: String, reason: String },

    #[error("invalid target layer: {0}")]
    InvalidTargetLayer(String),

    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error("mask not found: {0}")]
    MaskNotFound(PathBuf),

    #[error("generator not configured")]
    GeneratorNotConfigured,

    #[error("mask generator failed: {0}")]
    GeneratorFailed(String),

    #[error("insufficient images: requested {requested}, found {available} with matching masks (short by {})", requested - available)]
    InsufficientImages { requested: usize, available: usize },

    #[error("duplicate image id {0}")]
    DuplicateImageId(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("no CAMs given")]
    NoCams,

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("malformed {what}: {reason}")]
    Format { what: String, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn format(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            reason: reason.into(),
        }
    }
}
