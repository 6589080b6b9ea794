use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A hop of a path has no room for the requested demand.
    #[error("insufficient capacity on link {u}-{v} wavelength {wavelength}: residual {residual} Gb/s < demand {demand} Gb/s")]
    Capacity {
        u: usize,
        v: usize,
        wavelength: usize,
        residual: f64,
        demand: f64,
    },

    #[error("{source_name}:{line}: {msg}")]
    Parse {
        source_name: String,
        line: usize,
        msg: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("instance too large for exhaustive search: {0}")]
    Size(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
