//! Scenario runner for the dtsim engine.
//!
//! Parses scenario configs, loads or synthesises bathymetry, places the
//! impact hump, drives engine runs and sweeps, and writes snapshots and
//! metrics.

pub mod bathymetry;
pub mod config;
pub mod hump;
pub mod metrics;
pub mod scenario;
pub mod snapshot;
pub mod sweep;

use dtsim::engine::EngineError;
use dtsim::kernels::KernelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("instability: {0}")]
    Unstable(String),
    #[error("engine: {0}")]
    Engine(String),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn format(path: impl AsRef<std::path::Path>, msg: impl Into<String>) -> Self {
        CliError::Format {
            path: path.as_ref().display().to_string(),
            msg: msg.into(),
        }
    }

    /// Process exit status for each error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Format { .. } => 3,
            CliError::Unstable(_) => 4,
            CliError::Engine(_) => 5,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Kernel(KernelError::Unstable { .. }) => CliError::Unstable(e.to_string()),
            EngineError::Config(m) => CliError::Config(m),
            other => CliError::Engine(other.to_string()),
        }
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::Unstable { .. } => CliError::Unstable(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Format {
            path: "csv".into(),
            msg: e.to_string(),
        }
    }
}
