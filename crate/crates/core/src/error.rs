use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("cannot interpolate: need at least 2 frames, got {0}")]
    CannotInterpolate(usize),

    #[error("no frames in exposure window [{start}, {end}]")]
    NoFramesInExposure { start: f64, end: f64 },

    #[error("sequence covers [{have_start}, {have_end}] but [{start}, {end}] is required")]
    Coverage {
        start: f64,
        end: f64,
        have_start: f64,
        have_end: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("degenerate time window [{0}, {1}]")]
    DegenerateWindow(f64, f64),

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
