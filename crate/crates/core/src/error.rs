use std::io;

use thiserror::Error;

/// Errors raised by the density-evolution engine and its helpers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid shape invalid: {0}")]
    InvalidShape(String),

    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("window width w={w} must satisfy 1 <= w <= L={len}")]
    InvalidWindow { w: usize, len: usize },

    /// A violated ensemble constraint, named in words.
    #[error("invalid ensemble parameters: {0}")]
    InvalidParams(String),

    #[error("shortening domain invalid: {0}")]
    InvalidDomain(String),

    #[error("every section is shortened; no transmitted bits")]
    NoTransmittedBits,

    #[error("burst section {0:?} lies inside the shortening domain")]
    BurstInShortened(Vec<usize>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bisection bracket rejected: lo={lo} gave {lo_verdict}, hi={hi} gave {hi_verdict}")]
    BracketRejected {
        lo: f64,
        hi: f64,
        lo_verdict: String,
        hi_verdict: String,
    },

    /// `line` is 1-based; 0 when the value did not come from a file line.
    #[error("configuration error{}: {msg}", if *.line > 0 { format!(" at line {line}") } else { String::new() })]
    Config { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
