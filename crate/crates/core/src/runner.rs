//! Runs experiments and turns fold records into report-ready summaries.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetSnapshot;
use crate::metrics::{self, aggregate, diagnostics, DiagnosticsConfig, MetricError, MetricName, MetricSummary, OverfitDiagnostics};
use crate::selection::{detect_degenerate, select_best, Candidate, DegenerateKind, RowStatus, SelectionResult, DEFAULT_DEGENERACY_TOLERANCE};
use crate::validation::{run_experiment, ExperimentSpec, FoldRecord, ValidationError};
use crate::TaskKind;

/// Name of the per-fold `1 - accuracy` series used for classification diagnostics.
pub const ERROR_RATE: &str = "error_rate";

/// Everything known about one completed experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub snapshot_id: String,
    pub folds: Vec<FoldRecord>,
    /// One summary per requested scalar metric, in request order.
    pub summaries: Vec<MetricSummary>,
    /// Fold series the diagnostics were computed from.
    pub diagnostic_summary: MetricSummary,
    pub diagnostics: OverfitDiagnostics,
    pub r2_test_mean: Option<f64>,
    pub degenerate_kind: Option<DegenerateKind>,
    pub status: RowStatus,
    pub unequal_fold_sizes: bool,
}

impl ExperimentResult {
    pub fn summary(&self, metric: MetricName) -> Option<&MetricSummary> {
        self.summaries.iter().find(|s| s.metric_name == metric.as_str())
    }

    pub fn candidate(&self) -> Candidate {
        Candidate {
            experiment_id: self.spec.experiment_id.clone(),
            lor: self.diagnostics.lor,
            cos: self.diagnostics.cos,
            test_metric_mean: self.diagnostic_summary.test_mean,
            status: self.status.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentFailure {
    pub experiment_id: String,
    pub message: String,
}

/// Results of a whole plan, in plan order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub results: Vec<ExperimentResult>,
    pub failures: Vec<ExperimentFailure>,
    /// Best rows, chosen separately for each task.
    pub selection: BTreeMap<TaskKind, SelectionResult>,
    pub config: DiagnosticsConfig,
}

impl RunOutcome {
    pub fn from_parts(results: Vec<ExperimentResult>, failures: Vec<ExperimentFailure>, config: DiagnosticsConfig) -> Self {
        let mut selection = BTreeMap::new();
        for task in [TaskKind::Regression, TaskKind::Classification] {
            let candidates: Vec<Candidate> =
                results.iter().filter(|r| r.spec.task == task).map(ExperimentResult::candidate).collect();
            if !candidates.is_empty() {
                selection.insert(task, select_best(&candidates));
            }
        }
        Self { results, failures, selection, config }
    }

    pub fn is_best_lor(&self, result: &ExperimentResult) -> bool {
        self.selection
            .get(&result.spec.task)
            .and_then(|s| s.best_lor_experiment_id.as_deref())
            .is_some_and(|id| id == result.spec.experiment_id)
    }

    pub fn is_best_cos(&self, result: &ExperimentResult) -> bool {
        self.selection
            .get(&result.spec.task)
            .and_then(|s| s.best_cos_experiment_id.as_deref())
            .is_some_and(|id| id == result.spec.experiment_id)
    }
}

/// Error metric used for LOR/COS: MAE, then MSE, then RMSE for regression;
/// the fold error rate for classification.
pub fn diagnostic_series(spec: &ExperimentSpec, folds: &[FoldRecord]) -> Option<(String, Vec<f64>, Vec<f64>)> {
    match spec.task {
        TaskKind::Regression => {
            let metric = [MetricName::Mae, MetricName::Mse, MetricName::Rmse]
                .into_iter()
                .find(|m| spec.metric_names.contains(m))?;
            let train = folds.iter().map(|f| f.train_metrics[&metric]).collect();
            let test = folds.iter().map(|f| f.test_metrics[&metric]).collect();
            Some((metric.as_str().to_string(), train, test))
        }
        TaskKind::Classification => {
            let rate = |cm: &Option<Vec<Vec<u64>>>| {
                let cm = cm.as_ref().expect("classification folds carry confusion matrices");
                let total: u64 = cm.iter().flatten().sum();
                let correct: u64 = (0..cm.len()).map(|i| cm[i][i]).sum();
                1.0 - correct as f64 / total as f64
            };
            let train = folds.iter().map(|f| rate(&f.train_confusion)).collect();
            let test = folds.iter().map(|f| rate(&f.test_confusion)).collect();
            Some((ERROR_RATE.to_string(), train, test))
        }
    }
}

/// Test R² for colouring: the mean of fold values, or the pooled out-of-fold
/// value when some fold has no defined R² (e.g. single-row folds).
pub fn r2_test_mean(folds: &[FoldRecord]) -> Option<f64> {
    let per_fold: Option<Vec<f64>> = folds.iter().map(|f| metrics::r_squared(&f.test_true, &f.test_predictions).ok()).collect();
    match per_fold {
        Some(values) if !values.is_empty() => Some(values.iter().sum::<f64>() / values.len() as f64),
        _ => {
            let truth: Vec<f64> = folds.iter().flat_map(|f| f.test_true.iter().copied()).collect();
            let pred: Vec<f64> = folds.iter().flat_map(|f| f.test_predictions.iter().copied()).collect();
            metrics::r_squared(&truth, &pred).ok()
        }
    }
}

/// Aggregates fold records into an [`ExperimentResult`].
pub fn summarize(
    spec: &ExperimentSpec,
    snapshot_id: &str,
    folds: Vec<FoldRecord>,
    config: &DiagnosticsConfig,
) -> Result<ExperimentResult, MetricError> {
    let mut summaries = Vec::new();
    for metric in spec.scalar_metric_names() {
        let train: Vec<f64> = folds.iter().map(|f| f.train_metrics[&metric]).collect();
        let test: Vec<f64> = folds.iter().map(|f| f.test_metrics[&metric]).collect();
        summaries.push(aggregate(&train, &test, metric.as_str())?);
    }
    let (name, train, test) = diagnostic_series(spec, &folds).ok_or(MetricError::EmptyInput)?;
    let diagnostic_summary = aggregate(&train, &test, &name)?;
    let diagnostics = diagnostics(&diagnostic_summary, config);

    let r2 = match spec.task {
        TaskKind::Regression => r2_test_mean(&folds),
        TaskKind::Classification => None,
    };
    let (_, degenerate_kind) = detect_degenerate(&folds, spec.task, DEFAULT_DEGENERACY_TOLERANCE);
    let status = RowStatus::new(spec.task, r2, degenerate_kind);
    let sizes: Vec<usize> = folds.iter().map(|f| f.test_indices.len()).collect();
    let unequal_fold_sizes = sizes.windows(2).any(|w| w[0] != w[1]);

    Ok(ExperimentResult {
        spec: spec.clone(),
        snapshot_id: snapshot_id.to_string(),
        folds,
        summaries,
        diagnostic_summary,
        diagnostics,
        r2_test_mean: r2,
        degenerate_kind,
        status,
        unequal_fold_sizes,
    })
}

/// Runs and summarizes one experiment.
pub fn run_one(
    spec: &ExperimentSpec,
    snapshot: &DatasetSnapshot,
    config: &DiagnosticsConfig,
) -> Result<ExperimentResult, ExperimentFailure> {
    let fail = |message: String| ExperimentFailure { experiment_id: spec.experiment_id.clone(), message };
    let folds = run_experiment(spec, snapshot).map_err(|e: ValidationError| fail(e.to_string()))?;
    summarize(spec, snapshot.snapshot_id(), folds, config).map_err(|e| fail(e.to_string()))
}

/// Runs every `(spec, snapshot)` pair, at most `jobs` at a time (0 = all cores).
/// Output order follows input order whatever the scheduling.
pub fn run_all(
    jobs: usize,
    experiments: &[(ExperimentSpec, DatasetSnapshot)],
    config: &DiagnosticsConfig,
) -> RunOutcome {
    let work = || -> Vec<Result<ExperimentResult, ExperimentFailure>> {
        experiments.par_iter().map(|(spec, snap)| run_one(spec, snap, config)).collect()
    };
    let outcomes = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    };
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    RunOutcome::from_parts(results, failures, *config)
}
