use std::path::PathBuf;

use qlink_core::linksim::SimError;
use qlink_core::models::ModelError;
use qlink_core::tomography::TomographyError;
use qlink_core::tsanalysis::AnalysisError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Config { path: String, source: SimError },
    #[error("{0}")]
    Usage(String),
    #[error("missing parameters: {}", .0.join(", "))]
    MissingParams(Vec<String>),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
}

impl CliError {
    /// 2 for anything wrong with what the user asked for, 3 when the
    /// request was valid but the data could not be analysed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ReadConfig { .. }
            | CliError::Config { .. }
            | CliError::Usage(_)
            | CliError::MissingParams(_) => 2,
            CliError::Simulation(SimError::Config { .. }) => 2,
            CliError::Model(_) => 2,
            _ => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
