//! Cross-validation splits and single-experiment execution.

mod experiment;
mod splits;

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::learners::LearnerError;
use crate::metrics::MetricError;

pub use experiment::{run_experiment, scalar_metrics, ExperimentSpec, FoldRecord, PreprocessingStep};
pub use splits::{make_splits, monte_carlo_test_size, FoldAssignment, SplitMethod, SplitPlan};

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("invalid split plan: {0}")]
    InvalidPlan(String),
    #[error("class {class} has {members} members but stratification needs at least {required}")]
    StratificationImpossible { class: usize, members: usize, required: usize },
    #[error("invalid experiment {experiment_id}: {message}")]
    InvalidExperiment { experiment_id: String, message: String },
    #[error("experiment {experiment_id}: {source}")]
    Dataset {
        experiment_id: String,
        #[source]
        source: DatasetError,
    },
    #[error("experiment {experiment_id}, fold {fold_index}: {source}")]
    FoldDataset {
        experiment_id: String,
        fold_index: usize,
        #[source]
        source: DatasetError,
    },
    #[error("experiment {experiment_id}, fold {fold_index}: {source}")]
    FoldLearner {
        experiment_id: String,
        fold_index: usize,
        #[source]
        source: LearnerError,
    },
    #[error("experiment {experiment_id}, fold {fold_index}: {source}")]
    FoldMetric {
        experiment_id: String,
        fold_index: usize,
        #[source]
        source: MetricError,
    },
}
