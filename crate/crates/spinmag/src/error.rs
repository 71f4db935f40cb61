use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] spinmag_core::Error),
    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
    #[error("config: {0}")]
    InvalidConfig(String),
    #[error("unknown preset `{0}` (known: {1})")]
    UnknownPreset(String, String),
    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),
    #[error("sweep value `{value}` for `{axis}`: {reason}")]
    BadSweepValue { axis: String, value: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {reason}")]
    BadInput { path: PathBuf, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv { path: path.into(), source }
    }
}
