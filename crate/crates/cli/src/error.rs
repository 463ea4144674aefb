use std::fmt;
use std::path::Path;

use eai_core::graph::GraphError;
use eai_core::ingest::IngestError;

/// Validation problems exit with 1, I/O failures with 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn in_file(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Validation(format!("{}: {e}", path.display()))
    }

    pub fn ingest(path: &Path, e: IngestError) -> Self {
        match e {
            IngestError::Io(e) => Self::io(path, e),
            other => Self::in_file(path, other),
        }
    }

    pub fn graph(path: &Path, e: GraphError) -> Self {
        match e {
            GraphError::Io(e) => Self::io(path, e),
            other => Self::in_file(path, other),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
