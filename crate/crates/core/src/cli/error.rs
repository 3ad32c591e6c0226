use std::fmt;

use serde::Serialize;

use crate::annotate::AnnotateError;
use crate::config::ConfigError;
use crate::corpus::CorpusError;
use crate::embed::EmbedError;
use crate::evalkit::EvalError;
use crate::jsonl::JsonlError;
use crate::qagen::QagenError;
use crate::retrieval::RetrievalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Input,
    Provider,
    Invariant,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Input => 3,
            ErrorKind::Provider => 4,
            ErrorKind::Invariant => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Input, message)
    }

    pub fn invariant(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Invariant, message)
    }

    pub fn exit_code(&self) -> u8 {
        self.kind.exit_code()
    }

    /// `{"error":"<kind>","code":N,"message":"..."}` on one line.
    pub fn to_json_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: ErrorKind,
            code: u8,
            message: &'a str,
        }
        let flat = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        serde_json::to_string(&Line {
            error: self.kind,
            code: self.exit_code(),
            message: &flat,
        })
        .expect("error line serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<JsonlError> for CliError {
    fn from(e: JsonlError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidConfig(_) => CliError::config(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<AnnotateError> for CliError {
    fn from(e: AnnotateError) -> Self {
        match e {
            AnnotateError::PoolTooSmall(_) | AnnotateError::ZeroBatchSize => CliError::config(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<QagenError> for CliError {
    fn from(e: QagenError) -> Self {
        let kind = match e {
            QagenError::Transport { .. } | QagenError::Protocol(_) => ErrorKind::Provider,
            QagenError::Template { .. } | QagenError::InvalidSplit(_) => ErrorKind::Config,
            _ => ErrorKind::Input,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        let kind = match e {
            EmbedError::InvalidConfig(_) => ErrorKind::Config,
            EmbedError::Malformed { .. } | EmbedError::Io { .. } => ErrorKind::Input,
            EmbedError::DimsMismatch { .. }
            | EmbedError::MissingKey(_)
            | EmbedError::Transport { .. }
            | EmbedError::Protocol(_) => ErrorKind::Provider,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        let kind = match e {
            RetrievalError::Embed(inner) => return inner.into(),
            RetrievalError::UnknownProvider { .. } | RetrievalError::InvalidPipeline { .. } | RetrievalError::ZeroK => {
                ErrorKind::Config
            }
            RetrievalError::BadRecord { .. } => ErrorKind::Invariant,
            _ => ErrorKind::Input,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::BadKs => CliError::config(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}
