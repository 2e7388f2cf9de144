//! Configuration, command dispatch and report files for the `ch-entropy`
//! binary.

pub mod commands;
pub mod config;
pub mod report;

use std::fs;
use std::path::Path;

pub use commands::run;
pub use config::{Command, Format, Overrides, RunConfig};
pub use report::{Check, Outcome, Report, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The configuration does not fit the schema or the command.
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Numerical(#[from] ch_entropy::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn schema(path: &str, message: impl Into<String>) -> Self {
        CliError::Schema { path: path.to_string(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

/// Reads the optional config file and layers the overrides on top.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let doc = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::schema("$", format!("{} is not valid JSON: {e}", p.display())))?
        }
        None => serde_json::json!({}),
    };
    RunConfig::from_value(overrides.apply(doc)?)
}
