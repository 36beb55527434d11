//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed container or header while decoding audio.
    #[error("format error: {0}")]
    Format(String),

    /// Well-formed container using a codec we do not decode.
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),

    /// Caller passed an out-of-domain argument.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A Mel filter has no support on the frequency grid.
    #[error("degenerate filter: {0}")]
    DegenerateFilter(String),

    /// Shapes or caches handed to a backward pass do not match the forward.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// CTC target cannot be aligned within the given number of frames.
    #[error("infeasible alignment: target needs at least {required} frames, got {frames}")]
    InfeasibleAlignment { required: usize, frames: usize },

    /// Dataset or run configuration is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// Training hit a non-finite loss or gradient and stopped.
    #[error("training aborted at epoch {epoch}, step {step}: {reason}")]
    TrainAbort {
        epoch: usize,
        step: usize,
        reason: String,
    },

    /// Normalizing by a maximum of zero.
    #[error("undefined normalization: {0}")]
    UndefinedNormalization(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
