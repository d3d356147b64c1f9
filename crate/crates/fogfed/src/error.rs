//! Crate-wide error type.

use thiserror::Error;

use crate::wire::WireError;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Array dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A numeric input is NaN or infinite where a finite value is required.
    #[error("invalid value: {0}")]
    InvalidValue(String),

    /// Text-format parse failure (CSV dataset, config file).
    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Binary-format parse failure.
    #[error("parse error in {path} at byte {offset}: {msg}")]
    ParseBinary {
        path: String,
        offset: usize,
        msg: String,
    },

    /// Invalid run or topology configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A fog node ran out of full windows.
    #[error("fog {fog_id} has no full window left (cursor {cursor}, shard length {len})")]
    StreamExhausted {
        fog_id: u32,
        cursor: usize,
        len: usize,
    },

    /// Aggregation inputs are inconsistent with each other.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Wire codec failure.
    #[error("protocol error: {0}")]
    Wire(#[from] WireError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
