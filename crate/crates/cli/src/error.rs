use std::fmt;

use thiserror::Error;

/// Pipeline stage that failed, for stage-tagged exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Regress,
    Select,
    Med,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Regress => "regress",
            Stage::Select => "select",
            Stage::Med => "med",
        })
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error("empty result: {0}")]
    Empty(String),
    #[error("{stage}: {message}")]
    Stage { stage: Stage, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Empty(_) => 4,
            CliError::Stage { stage, .. } => match stage {
                Stage::Regress => 5,
                Stage::Select => 6,
                Stage::Med => 7,
            },
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }

    pub(crate) fn stage(stage: Stage, e: impl fmt::Display) -> Self {
        CliError::Stage {
            stage,
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
