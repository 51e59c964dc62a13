use std::fmt;

use merw::MerwError;

/// Errors of the command line, each mapped to an exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config (exit 2).
    Usage(String),
    /// Budget, overflow or file-system trouble (exit 3).
    Resource(String),
    Io(String),
    /// A failed check: oracle disagreement, failed verification, replay mismatch (exit 1).
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Resource(_) | CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Resource(m) => write!(f, "resource error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<MerwError> for CliError {
    fn from(e: MerwError) -> Self {
        match e {
            MerwError::Budget { .. } | MerwError::Overflow { .. } => CliError::Resource(e.to_string()),
            MerwError::Io(_) => CliError::Io(e.to_string()),
            MerwError::Mismatch(_) | MerwError::Contract(_) => CliError::Failed(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
