//! Library half of the `fogstream` command-line tool: the benchmark harness
//! and the command implementations, kept callable so tests can drive them
//! in-process.

#![forbid(unsafe_code)]

pub mod bench;
pub mod commands;

use thiserror::Error;

/// Process-level failures, each mapped to a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// At least one message failed its integrity check.
    #[error("one or more messages were rejected")]
    Reject,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    /// 0 success, 1 usage, 2 integrity reject, 3 i/o, 4 validation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Reject => 2,
            CliError::Io(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}
