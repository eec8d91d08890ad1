use thiserror::Error;

use crate::ontic::Stage;

/// Errors raised anywhere in the simulator or analyzer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unlabeled trial {trial_index}: no setting on the requested wing")]
    UnlabeledTrial { trial_index: u64 },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("trial {trial_index} has no snapshot at stage {stage}")]
    MissingSnapshot { trial_index: u64, stage: Stage },

    #[error("si test needs at least two distinct labels, found {found}")]
    SingleLabel { found: usize },

    #[error("entropy exhausted: replay source has {available} joint settings, draw {requested} requested")]
    EntropyExhausted { available: usize, requested: u64 },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("chsh: missing setting cell {0}")]
    MissingSettingCell(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid config:\n{}", format_config_errors(.0))]
    Config(Vec<ConfigError>),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One problem found while validating a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

fn format_config_errors(errors: &[ConfigError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    /// Short stable identifier used in machine-readable CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnlabeledTrial { .. } => "unlabeled-trial",
            Error::EmptyEnsemble => "empty-ensemble",
            Error::MissingSnapshot { .. } => "missing-snapshot",
            Error::SingleLabel { .. } => "single-label",
            Error::EntropyExhausted { .. } => "entropy-exhausted",
            Error::InvalidState(_) => "invalid-state",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::MissingSettingCell(_) => "missing-setting-cell",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
