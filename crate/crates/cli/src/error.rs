use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown config key '{0}'")]
    UnknownKey(String),

    #[error("invalid value '{value}' for {key}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },

    #[error("{0}")]
    Config(String),

    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("csv {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    #[error("malformed csv {path}: {message}")]
    CsvFormat { path: PathBuf, message: String },

    #[error(transparent)]
    Numerical(#[from] cascade_core::Error),
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(cascade_core::Error::InvalidParameter(_)) => 2,
            CliError::Numerical(_) => 3,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } | CliError::UnknownKey(_) | CliError::InvalidValue { .. } => "config",
            CliError::Config(_) => "config",
            CliError::Io { .. } | CliError::Csv { .. } | CliError::CsvFormat { .. } => "io",
            CliError::Numerical(cascade_core::Error::InvalidParameter(_)) => "config",
            CliError::Numerical(_) => "numerical",
        }
    }

    /// One-line JSON record for standard error.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
