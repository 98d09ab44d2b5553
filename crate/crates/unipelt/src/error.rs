use std::path::PathBuf;

/// Failures of the file and command layer. Each maps to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] unipelt_core::Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid config file {path}: {msg}")]
    ConfigFile { path: PathBuf, msg: String },
    /// Checks ran but some failed.
    #[error("{0}")]
    Failed(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 1 for failed checks, 2 for usage and input problems, 3 for divergence.
    pub fn exit_code(&self) -> i32 {
        use unipelt_core::Error as E;
        match self {
            CliError::Core(E::Divergence { .. }) => 3,
            CliError::Failed(_) => 1,
            _ => 2,
        }
    }
}

pub(crate) fn read_text(path: &std::path::Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

pub(crate) fn write_bytes(path: &std::path::Path, bytes: &[u8]) -> CliResult<()> {
    let io = |source| CliError::Write { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}
