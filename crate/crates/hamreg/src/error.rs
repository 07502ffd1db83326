//! Error type for the CLI layer, with the process exit-code mapping.

use hamreg_core::CoreError;
use std::fmt;
use std::path::PathBuf;

pub type Result<T> = core::result::Result<T, CliError>;

#[derive(Debug)]
pub enum CliError {
    /// Underlying numerical/model error.
    Core(CoreError),
    /// Filesystem failure on a specific path.
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed file contents (config, dataset, checkpoint).
    Parse { path: PathBuf, line: usize, message: String },
    /// Invalid configuration or flag combination.
    Config(String),
    /// A training run diverged where a converged model was required.
    Divergence(String),
}

/// Process exit codes: 0 success, 2 divergence, 3 configuration error,
/// 1 anything else.
impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Divergence(_) => 2,
            CliError::Config(_) | CliError::Parse { .. } => 3,
            CliError::Core(CoreError::Config(_)) => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => {
                write!(f, "{}: {source}", path.display())
            }
            CliError::Parse { path, line, message } => {
                write!(f, "{}:{line}: {message}", path.display())
            }
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Divergence(m) => write!(f, "training diverged: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn parse_err(path: &std::path::Path, line: usize, message: String) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}
