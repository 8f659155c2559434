use std::path::PathBuf;

use thiserror::Error;

use shotseq_core::PermError;

#[derive(Debug, Error)]
pub enum DataError {
    /// Malformed input, located by 1-based line number.
    #[error("{}line {line}: {message}", source_prefix(.path))]
    Format {
        path: Option<PathBuf>,
        line: usize,
        message: String,
    },
    #[error("scene {scene_id} is unusable: {remaining} shots left, need {needed}")]
    Unusable {
        scene_id: String,
        remaining: usize,
        needed: usize,
    },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid parameters: {0}")]
    Config(String),
    #[error("join error: {0}")]
    Join(String),
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn source_prefix(path: &Option<PathBuf>) -> String {
    path.as_ref()
        .map(|p| format!("{}: ", p.display()))
        .unwrap_or_default()
}

impl DataError {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        DataError::Format {
            path: None,
            line,
            message: message.into(),
        }
    }

    /// Attaches a file path to a format error.
    pub fn at(self, file: &std::path::Path) -> Self {
        match self {
            DataError::Format { line, message, .. } => DataError::Format {
                path: Some(file.to_path_buf()),
                line,
                message,
            },
            other => other,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))
}

pub(crate) fn write(path: &std::path::Path, contents: impl AsRef<[u8]>) -> Result<(), DataError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| DataError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| DataError::io(path, e))
}
