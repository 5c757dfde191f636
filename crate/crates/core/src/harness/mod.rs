//! Scenario configuration, run orchestration, logs, summaries and exports.

pub mod compare;
pub mod config;
pub mod distributed;
pub mod export;
pub mod lockstep;
pub mod report;
pub mod runlog;
pub mod summary;

use thiserror::Error;

use crate::nodes::NodeError;

pub use compare::{compare_runs, CompareReport};
pub use config::{Mode, ScenarioConfig};
pub use export::export_plot_data;
pub use lockstep::{run_lockstep, RunOutput};
pub use runlog::{RunLog, RunLogRow};
pub use summary::Summary;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("malformed run log: {0}")]
    BadLog(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit code: 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) | HarnessError::BadLog(_) => 1,
            _ => 2,
        }
    }
}
