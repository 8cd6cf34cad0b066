//! Seeded experiment runs, L2 summaries and rank-test comparisons of the
//! CMI and SIAA autoscalers.

pub mod config;
pub mod experiment;
pub mod report;
pub mod stats;
pub mod synthetic;

use std::path::{Path, PathBuf};

use spotflow_core::cloud::CloudError;
use spotflow_core::workflow::generate::GenerateError;
use spotflow_core::workflow::WorkflowError;
use thiserror::Error;

pub use config::{ExperimentConfig, Pooling};
pub use experiment::{run_experiment, RunRecord, RunSummary, StrategyPoint};
pub use report::{l2_summary, summarize, ComparisonReport};
pub use stats::{mann_whitney_u, MannWhitney, Verdict};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("bad record at line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("L2 summary of `{workflow}` needs at least 2 successful runs, got {count}")]
    TooFewRecords { workflow: String, count: usize },
    #[error("split {split} lies outside the trace span [{start}, {end}]")]
    SplitOutsideTrace { split: f64, start: f64, end: f64 },
    #[error("worker pool: {0}")]
    WorkerPool(String),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
