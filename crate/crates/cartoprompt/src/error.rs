use std::path::PathBuf;

use cartoprompt_core::curate::CurateError;
use cartoprompt_core::descriptor::DescriptorError;
use cartoprompt_core::embed::EmbedError;
use cartoprompt_core::geo::GeoError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },
    #[error("format error: {0}")]
    Format(String),
    #[error("HTTP {status} from {url}")]
    HttpStatus { status: u16, url: String, body: String },
    #[error("request to {url} timed out after {seconds} s")]
    Timeout { url: String, seconds: f64 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Curate(#[from] CurateError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Upstream HTTP status when the error came from a remote server.
    pub fn upstream_status(&self) -> Option<u16> {
        match self {
            Error::HttpStatus { status, .. } => Some(*status),
            _ => None,
        }
    }
}

impl From<reqwest::Error> for Error {
    fn from(e: reqwest::Error) -> Self {
        Error::Transport(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
