//! GF(2) parity-check machinery: matrices and their Tanner graphs,
//! pseudo-tree encoding schedules, the two-pass encoder with reevaluated
//! bits, the trial-search decoder, and an independent elimination-based
//! oracle encoder for cross-checking.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

mod codec;
mod matrix;
mod oracle;
mod schedule;

pub use codec::{trial_bound, Codeword, DecodeFailure, DecodeOutcome, TrialBound};
pub use matrix::{ParityCheckMatrix, TannerGraph};
pub use oracle::{oracle_encode, oracle_encode_at};
pub use schedule::{build_stopping_set, EncodingStoppingSet, ParityStep};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LdpcError {
    /// Text input rejected, naming the offending 1-based line.
    Parse { line: usize, reason: String },
    /// Structural constraint violated while building a matrix.
    Shape(&'static str),
    /// The check rows are linearly dependent; the listed rows eliminated to
    /// zero.
    RankDeficient { zero_rows: Vec<usize> },
    /// The requested info positions do not index an invertible complement.
    NotAnInformationSet,
    /// No valid encoding schedule under the given constraints.
    ConstructionFailed(String),
    LengthMismatch { expected: usize, got: usize },
}

impl LdpcError {
    fn parse(line: usize, reason: impl Into<String>) -> Self {
        LdpcError::Parse {
            line,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for LdpcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LdpcError::Parse { line, reason } => write!(f, "parse error at line {line}: {reason}"),
            LdpcError::Shape(reason) => write!(f, "invalid matrix: {reason}"),
            LdpcError::RankDeficient { zero_rows } => {
                write!(f, "rank-deficient matrix; dependent rows {zero_rows:?}")
            }
            LdpcError::NotAnInformationSet => {
                write!(f, "positions do not form an information set")
            }
            LdpcError::ConstructionFailed(reason) => {
                write!(f, "stopping-set construction failed: {reason}")
            }
            LdpcError::LengthMismatch { expected, got } => {
                write!(f, "expected {expected} bits, got {got}")
            }
        }
    }
}

impl core::error::Error for LdpcError {}
