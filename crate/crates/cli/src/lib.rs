//! Batch front end for the coupled hydrogen simulation: configuration
//! parsing, run orchestration, output files, plots and run comparison.

pub mod compare;
pub mod config;
pub mod output;
pub mod plot;
pub mod run;

use std::fmt;
use std::path::PathBuf;

pub use compare::{compare_runs, Comparison};
pub use config::{parse_config, parse_config_str, ConfigError, RunConfig};
pub use run::{execute, RunOptions, RunOutcome};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    /// A run stopped on a numerical-health check; the last good state was
    /// saved to `checkpoint` when possible.
    Numerical {
        message: String,
        checkpoint: Option<PathBuf>,
    },
    Schema(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Schema(_) => EXIT_CONFIG,
            CliError::Numerical { .. } => EXIT_NUMERICAL,
            CliError::Other(_) => EXIT_FAILURE,
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        CliError::Config(ConfigError {
            line: None,
            message: message.into(),
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e}"),
            CliError::Numerical { message, checkpoint } => {
                write!(f, "{message}")?;
                if let Some(p) = checkpoint {
                    write!(f, " (last good state saved to {})", p.display())?;
                }
                Ok(())
            }
            CliError::Schema(m) => write!(f, "incompatible manifests: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<nondipole_core::Error> for CliError {
    fn from(e: nondipole_core::Error) -> Self {
        use nondipole_core::Error as E;
        match e {
            E::NumericalHealth(m) => CliError::Numerical {
                message: format!("numerical health check failed: {m}"),
                checkpoint: None,
            },
            E::Domain(_) | E::Grid(_) | E::Label { .. } | E::Capacity { .. } | E::Window(_) => {
                CliError::config(e.to_string())
            }
            other => CliError::Other(other.to_string()),
        }
    }
}
