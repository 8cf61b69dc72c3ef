//! Experiment orchestration: flat TOML configs in, JSON records and CSV tables out.

pub mod config;
pub mod experiments;
pub mod record;

use thiserror::Error;

pub use config::{ExperimentConfig, ExperimentKind, InitialState};
pub use experiments::{initial_field, run_experiment, ModuleError};
pub use record::{Assertion, ResultRecord, Table};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{kind} experiment failed: {source}")]
    Module {
        kind: ExperimentKind,
        #[source]
        source: ModuleError,
    },
}
