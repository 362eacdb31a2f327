use std::path::PathBuf;

use thiserror::Error;

/// Failure of a subcommand, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("table 1 mismatch: {0}")]
    Table1Mismatch(String),
    #[error(transparent)]
    Core(#[from] prebandit::Error),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// 0 success, 1 validation or I/O error, 2 table 1 mismatch, 3 runtime contract violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Table1Mismatch(_) => 2,
            CliError::Core(e) if is_contract_violation(e) => 3,
            _ => 1,
        }
    }
}

fn is_contract_violation(e: &prebandit::Error) -> bool {
    use prebandit::Error;
    match e {
        Error::ContractViolation(_) | Error::NegativeRegret(_) => true,
        Error::Replicate { source, .. } => is_contract_violation(source),
        _ => false,
    }
}
