use thiserror::Error;

/// Everything that can go wrong while reading a project file.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("JSON parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("invalid data at {pointer}: {source}")]
    Invalid {
        pointer: String,
        source: crate::Error,
    },
    #[error("dangling reference at {pointer}: no {kind} named {name:?}")]
    Dangling {
        pointer: String,
        kind: &'static str,
        name: String,
    },
}

impl ConfigError {
    pub(crate) fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Schema {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(pointer: impl Into<String>, source: crate::Error) -> Self {
        ConfigError::Invalid {
            pointer: pointer.into(),
            source,
        }
    }

    /// JSON pointer of the offending location, when known.
    pub fn pointer(&self) -> Option<&str> {
        match self {
            ConfigError::Schema { pointer, .. }
            | ConfigError::Invalid { pointer, .. }
            | ConfigError::Dangling { pointer, .. } => Some(pointer),
            _ => None,
        }
    }
}
