//! Result persistence, plan/result tables and diagnostic plots.

mod document;
pub mod format;
mod persist;
mod plots;
mod tables;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricSummary;
use crate::runner::{ExperimentResult, RunOutcome};
use crate::selection::RowStatus;
use crate::TaskKind;

pub use document::{render_document, ReportDocument, RunMetadata, STD_CONVENTION};
pub use persist::{load_results, persist_results, PersistedPaths, StoredResults, FOLDS_FILE, METADATA_FILE, PLAN_FILE, RESULTS_FILE, SUMMARY_FILE};
pub use plots::{confusion_markdown, emit_plots, loss_svg, scatter_svg, summed_test_confusion};
pub(crate) use plots::file_safe;
pub use tables::{render_plan_table, render_results_table, TableFormat};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to report: {0}")]
    EmptyReport(&'static str),
    #[error("no results found in {0}")]
    MissingResults(PathBuf),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

impl ReportError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ReportError::Io { path: path.into(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Highlight {
    #[default]
    None,
    BestLor,
    BestCos,
    Both,
}

impl Highlight {
    pub fn from_flags(best_lor: bool, best_cos: bool) -> Self {
        match (best_lor, best_cos) {
            (true, true) => Highlight::Both,
            (true, false) => Highlight::BestLor,
            (false, true) => Highlight::BestCos,
            (false, false) => Highlight::None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Highlight::None => "none",
            Highlight::BestLor => "best_lor",
            Highlight::BestCos => "best_cos",
            Highlight::Both => "both",
        }
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment_id: String,
    pub task: TaskKind,
    pub model: String,
    pub preprocessing: String,
    pub normalization: String,
    /// Fold summaries of the requested scalar metrics.
    pub metrics: Vec<MetricSummary>,
    pub lor: Option<f64>,
    pub cos: Option<f64>,
    pub r2_test_mean: Option<f64>,
    pub status: RowStatus,
    pub highlight: Highlight,
}

impl ReportRow {
    pub fn from_result(result: &ExperimentResult, highlight: Highlight) -> Self {
        Self {
            experiment_id: result.spec.experiment_id.clone(),
            task: result.spec.task,
            model: result.spec.learner.instance_label(),
            preprocessing: result.spec.preprocessing_label(),
            normalization: result.spec.normalization_label(),
            metrics: result.summaries.clone(),
            lor: result.diagnostics.lor,
            cos: result.diagnostics.cos,
            r2_test_mean: result.r2_test_mean,
            status: result.status.clone(),
            highlight,
        }
    }

    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric_name == name)
    }

    /// Short status text: colour, degeneracy and eligibility.
    pub fn status_text(&self) -> String {
        let mut parts = Vec::new();
        if self.status.color != crate::selection::Color::NotApplicable {
            parts.push(self.status.color.as_str().to_string());
        }
        if let Some(kind) = self.status.degenerate_kind {
            parts.push(format!("degenerate ({})", kind.as_str()));
        }
        if self.status.excluded_from_selection {
            parts.push("excluded".to_string());
        }
        if parts.is_empty() {
            "eligible".to_string()
        } else {
            parts.join(", ")
        }
    }
}

/// Report rows for a run, with highlights taken from the per-task selection.
pub fn report_rows(outcome: &RunOutcome) -> Vec<ReportRow> {
    outcome
        .results
        .iter()
        .map(|r| ReportRow::from_result(r, Highlight::from_flags(outcome.is_best_lor(r), outcome.is_best_cos(r))))
        .collect()
}

/// Metric names in order of first appearance across rows.
pub(crate) fn metric_columns(rows: &[ReportRow]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for row in rows {
        for m in &row.metrics {
            if !names.contains(&m.metric_name) {
                names.push(m.metric_name.clone());
            }
        }
    }
    names
}

/// Display label of a stored metric name (`mae` -> `MAE`).
pub(crate) fn metric_label(name: &str) -> String {
    name.parse::<crate::metrics::MetricName>().map_or_else(|_| name.to_string(), |m| m.label().to_string())
}
