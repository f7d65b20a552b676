use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read scenario {path}: {source}")]
    ScenarioRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid scenario: {0}")]
    ScenarioParse(#[from] serde_json::Error),

    #[error("unsupported schema_version {found}; expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(#[from] epimfg_core::Error),

    #[error("{} validation check(s) failed: {}", .0.len(), .0.join(", "))]
    Validation(Vec<String>),
}

impl CliError {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::ScenarioRead { .. }
            | CliError::ScenarioParse(_)
            | CliError::SchemaVersion { .. }
            | CliError::Scenario(_) => "scenario",
            CliError::Output { .. } => "io",
            CliError::Solver(_) => "solver",
            CliError::Validation(_) => "validation",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
        }
        serde_json::json!({ "error": Body { kind: self.kind(), message: self.to_string() } })
    }
}
