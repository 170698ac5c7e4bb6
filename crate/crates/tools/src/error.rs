use std::path::{Path, PathBuf};

use adsage_core::Error as CoreError;

/// Process exit status for configuration problems.
pub const EXIT_CONFIG: u8 = 1;
/// Process exit status for malformed or inconsistent data.
pub const EXIT_DATA: u8 = 2;

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type ToolResult<T> = Result<T, ToolError>;

impl ToolError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ToolError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, message: impl Into<String>) -> Self {
        ToolError::Parse {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            ToolError::Config(_) => EXIT_CONFIG,
            ToolError::Core(CoreError::Config(_) | CoreError::Schema(_)) => EXIT_CONFIG,
            _ => EXIT_DATA,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(ToolError::Config("x".into()).exit_code(), 1);
        assert_eq!(ToolError::Core(CoreError::Schema("x".into())).exit_code(), 1);
        assert_eq!(ToolError::Core(CoreError::EmptyTrainingSet).exit_code(), 2);
        assert_eq!(ToolError::parse(Path::new("f"), "bad").exit_code(), 2);
    }
}
