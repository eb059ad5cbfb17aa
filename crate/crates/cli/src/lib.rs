//! Driver for the geotomo experiments: JSON configuration, artifact
//! directories, the subcommands and the acceptance suite.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod suite;

use geotomo::GeoError;
use thiserror::Error;

pub use config::Config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    NotSimple(String),
    #[error(transparent)]
    Numerical(GeoError),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl From<GeoError> for CliError {
    fn from(e: GeoError) -> Self {
        match e {
            GeoError::NotSimple(m) => CliError::NotSimple(m),
            GeoError::Io(m) => CliError::Io(m),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    /// Process exit status for the error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::NotSimple(_) => 3,
            CliError::Numerical(_) | CliError::Io(_) => 4,
        }
    }
}
