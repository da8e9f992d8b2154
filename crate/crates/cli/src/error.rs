use std::path::PathBuf;

use gmm_gem::GemError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const OUTPUT: i32 = 1;
    pub const INVALID: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const MAX_ITERATIONS: i32 = 4;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot read {}: {reason}", path.display())]
    Input { path: PathBuf, reason: String },

    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Model { context: String, source: GemError },

    #[error("{algorithm} failed at iteration {iteration}: {source}")]
    Run {
        algorithm: String,
        iteration: usize,
        source: GemError,
    },
}

impl HarnessError {
    pub fn model(context: impl Into<String>, source: GemError) -> Self {
        HarnessError::Model {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Input { .. } => exit::INVALID,
            HarnessError::Output { .. } => exit::OUTPUT,
            HarnessError::Model { source, .. } | HarnessError::Run { source, .. } => {
                if source.is_numerical() {
                    exit::NUMERICAL
                } else {
                    exit::INVALID
                }
            }
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
