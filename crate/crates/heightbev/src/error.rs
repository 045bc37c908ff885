use std::path::{Path, PathBuf};

use heightbev_core::Error as CoreError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    ConfigInvalid(String),
    #[error("{0}")]
    Dimension(String),
    #[error("{0} exists; pass --force to overwrite")]
    OutputExists(PathBuf),
    #[error("{path}: wrong magic bytes (expected `{expected}`)")]
    MagicMismatch { path: PathBuf, expected: String },
    #[error("{path}: malformed header: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("{path}: truncated payload ({found} of {expected} bytes)")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Core(CoreError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Parse(format!("{}: {e}", path.display()))
    }

    /// Process exit code; every class of failure gets its own.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
            CliError::Io { .. } => 4,
            CliError::Parse(_) => 5,
            CliError::ConfigInvalid(_) => 6,
            CliError::Dimension(_) => 7,
            CliError::OutputExists(_) => 8,
            CliError::MagicMismatch { .. } | CliError::MalformedHeader { .. } | CliError::Truncated { .. } => 9,
            CliError::Core(_) => 10,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => "missing-file",
            CliError::Io { .. } => "io",
            CliError::Parse(_) => "malformed-input",
            CliError::ConfigInvalid(_) => "config-invalid",
            CliError::Dimension(_) => "dimension-mismatch",
            CliError::OutputExists(_) => "output-exists",
            CliError::MagicMismatch { .. } => "magic-mismatch",
            CliError::MalformedHeader { .. } => "malformed-header",
            CliError::Truncated { .. } => "truncated",
            CliError::Core(_) => "computation",
        }
    }

    /// Single-line machine-readable form for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::ShapeMismatch(m) => CliError::Dimension(m),
            CoreError::BevLargerThanTile { .. } => CliError::Dimension(e.to_string()),
            CoreError::InvalidConfig(_)
            | CoreError::InvalidWorldSpec(_)
            | CoreError::InvalidBevSpec(_)
            | CoreError::InvalidBins(_)
            | CoreError::InvalidCamera(_)
            | CoreError::UnknownEncoder(_) => CliError::ConfigInvalid(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

/// Exit code clap uses for usage errors.
pub const USAGE_EXIT: i32 = 2;
