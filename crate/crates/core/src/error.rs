use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid frame: {0}")]
    InvalidFrame(&'static str),

    #[error("invalid patch: {0}")]
    InvalidPatch(&'static str),

    #[error("invalid state: {0}")]
    InvalidState(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("architecture mismatch: expected {expected:?}, got {actual:?}")]
    ArchitectureMismatch {
        expected: alloc::vec::Vec<usize>,
        actual: alloc::vec::Vec<usize>,
    },

    #[error("degenerate box {w}x{h}: both sides must be at least 4 px")]
    DegenerateBox { w: f64, h: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("model format: {0}")]
    Format(&'static str),

    #[error("numeric failure: {0}")]
    Numeric(&'static str),
}
