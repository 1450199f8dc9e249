use std::io;
use std::path::{Path, PathBuf};

/// Failure of a CLI stage, carrying the process exit code contract:
/// 1 for I/O and unreadable or missing artifacts, 2 for configuration, 3 for
/// verification.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] fedleak_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("missing {} (run `fedleak {stage}` first)", path.display())]
    Missing { stage: &'static str, path: PathBuf },
    #[error("verification failed: {0}")]
    Verify(String),
}

pub type Result<T> = std::result::Result<T, AppError>;

impl AppError {
    pub fn exit_code(&self) -> i32 {
        use fedleak_core::Error as E;
        match self {
            AppError::Config(_) => 2,
            AppError::Core(E::Config(_) | E::Shape { .. } | E::EmptyInput(_) | E::Stratification { .. }) => 2,
            AppError::Core(_) => 1,
            AppError::Io { .. } | AppError::Parse { .. } | AppError::Missing { .. } => 1,
            AppError::Verify(_) => 3,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> AppError + '_ {
        move |source| AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, line: usize, msg: impl Into<String>) -> AppError {
        AppError::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }
}

/// Reads a whole file, mapping "not found" to the stage that produces it.
pub fn read_artifact(path: &Path, stage: &'static str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => AppError::Missing {
            stage,
            path: path.to_path_buf(),
        },
        _ => AppError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(AppError::io(dir))?;
    }
    std::fs::write(path, contents).map_err(AppError::io(path))
}
