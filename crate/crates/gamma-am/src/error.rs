use std::path::PathBuf;

use gamma_am_core::ErrorKind;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] gamma_am_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 configuration, 3 data, 4 numeric.
    pub fn exit_code(&self) -> u8 {
        match self.kind() {
            "config" => 2,
            "numeric" => 4,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Io { .. } | Error::Parse { .. } | Error::Json(_) => "data",
            Error::Core(e) => match e.kind() {
                ErrorKind::Parameter => "config",
                ErrorKind::Data => "data",
                ErrorKind::Numeric => "numeric",
            },
        }
    }

    pub fn record(&self, stage: &str) -> ErrorRecord {
        ErrorRecord {
            stage: stage.to_string(),
            kind: self.kind().to_string(),
            exit_code: self.exit_code(),
            message: self.to_string(),
        }
    }
}

/// Machine-readable failure description written next to partial outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ErrorRecord {
    pub stage: String,
    pub kind: String,
    pub exit_code: u8,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_kinds() {
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(Error::parse("f", 3, "bad").exit_code(), 3);
        assert_eq!(Error::parse("f", 3, "bad").to_string(), "f:3: bad");
        let numeric: Error = gamma_am_core::Error::Degenerate("flat".into()).into();
        assert_eq!(numeric.exit_code(), 4);
        let param: Error = gamma_am_core::Error::Parameter("k".into()).into();
        assert_eq!(param.exit_code(), 2);
        let data: Error = gamma_am_core::Error::EmptyCorpus.into();
        assert_eq!(data.exit_code(), 3);
    }
}
