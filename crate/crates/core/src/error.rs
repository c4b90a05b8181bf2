// SPDX-License-Identifier: Apache-2.0
//! Error type shared by every stage of the toolchain.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input arity mismatch: expected {expected} bits, got {got}")]
    InputArity { expected: usize, got: usize },

    #[error("output arity mismatch: {left} vs {right} outputs")]
    OutputArity { left: usize, right: usize },

    #[error("{inputs} inputs exceeds the exhaustive-enumeration limit of {limit}")]
    TooManyInputs { inputs: usize, limit: usize },

    #[error("malformed structure: {0}")]
    Malformed(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("row-safety violation: {0}")]
    RowSafety(String),

    #[error("invalid row: {0}")]
    InvalidRow(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("command at line {line} failed: {source}")]
    Command {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("rewrite rule `{0}` is not truth-preserving")]
    UnsoundRule(String),

    #[error("compiled program disagrees with the reference for {op} at width {width}: {detail}")]
    Verification {
        op: String,
        width: usize,
        detail: String,
    },

    #[error("unsupported operation parameters: {0}")]
    Unsupported(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),

    #[error("validation error at line {line}: {msg}")]
    Validation { line: usize, msg: String },

    #[error("invalid operand data: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
