use std::path::PathBuf;

use fdrlink_core::FdrError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown preset `{0}`; expected one of E1, E2, ..., E8")]
    UnknownPreset(String),
    #[error("malformed config: {0}")]
    MalformedConfig(String),
    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] FdrError),
}

impl CliError {
    /// Process exit status. Usage errors from argument parsing exit with 64.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(_) => 1,
            CliError::UnknownPreset(_) => 2,
            CliError::MalformedConfig(_) | CliError::Input { .. } => 3,
            CliError::Output { .. } => 4,
        }
    }

    pub(crate) fn output(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
