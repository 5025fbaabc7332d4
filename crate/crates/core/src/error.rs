use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no phase-shifter power entry for resolution {0}")]
    UnknownResolution(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("could not bracket the power multiplier after {doublings} doublings")]
    BracketFailed { doublings: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serialization(String),
}
