use std::path::PathBuf;

use quasimean::GeoError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed config, CSV or arguments.
    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Geo(#[from] GeoError),

    #[error("verification failed: {}", .0.join(", "))]
    Verification(Vec<String>),

    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 64,
            CliError::Verification(_) => 1,
            CliError::Geo(GeoError::IntegrabilityFailed { .. }) => 1,
            CliError::Geo(_) | CliError::Output { .. } => 2,
        }
    }
}
