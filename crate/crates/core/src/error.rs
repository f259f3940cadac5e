use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while decoding or validating wire messages.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unknown protocol version {0}")]
    UnknownVersion(u8),
    #[error("message truncated: needed {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("mask has nonzero bits beyond channel {channels}")]
    NonzeroTrailingBits { channels: usize },
    #[error("{0} channels do not fit the 16-bit channel count")]
    TooManyChannels(usize),
    #[error("unsupported quantization width {0}")]
    BadQuantBits(u8),
    #[error("malformed payload: {0}")]
    MalformedStream(String),
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("non-finite loss at epoch {epoch}, step {step}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        detail: String,
    },
    #[error("non-finite evaluation in gradient check at coordinate {0}")]
    NonFiniteEvaluation(usize),
    #[error("checkpoint not found: {0}")]
    MissingCheckpoint(PathBuf),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_frame(self, frame: usize) -> Self {
        Error::Frame {
            frame,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
