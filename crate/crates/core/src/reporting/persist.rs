use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::document::RunMetadata;
use super::format::{exact, exact_opt};
use super::{metric_columns, report_rows, ReportError};
use crate::runner::RunOutcome;
use crate::validation::ExperimentSpec;

pub const FOLDS_FILE: &str = "folds.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const METADATA_FILE: &str = "run_metadata.json";
pub const RESULTS_FILE: &str = "results.json";
pub const PLAN_FILE: &str = "plan.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersistedPaths {
    pub folds: PathBuf,
    pub summary: PathBuf,
    pub metadata: PathBuf,
    pub results: PathBuf,
    pub plan: PathBuf,
}

/// Everything `persist_results` wrote, read back.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredResults {
    pub outcome: RunOutcome,
    pub plan: Vec<ExperimentSpec>,
    pub metadata: RunMetadata,
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer.write_record(row).expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}

fn fold_rows(outcome: &RunOutcome) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for result in &outcome.results {
        for fold in &result.folds {
            for (partition, values) in [("train", &fold.train_metrics), ("test", &fold.test_metrics)] {
                for metric in result.spec.scalar_metric_names() {
                    rows.push(vec![
                        fold.experiment_id.clone(),
                        fold.fold_index.to_string(),
                        partition.to_string(),
                        metric.as_str().to_string(),
                        exact(values[&metric]),
                    ]);
                }
            }
        }
    }
    rows
}

/// Summary CSV: one row per experiment at full precision; undefined values are empty.
pub fn summary_csv(outcome: &RunOutcome) -> Vec<u8> {
    let rows = report_rows(outcome);
    let metrics = metric_columns(&rows);
    let mut header: Vec<String> = ["exp_id", "model", "preproc", "normalization"].map(String::from).to_vec();
    for m in &metrics {
        for suffix in ["train_mean", "train_std", "test_mean", "test_std"] {
            header.push(format!("{m}_{suffix}"));
        }
    }
    header.extend(["lor", "cos", "r2_test_mean", "color", "degenerate", "highlight"].map(String::from));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let mut cells =
                vec![row.experiment_id.clone(), row.model.clone(), row.preprocessing.clone(), row.normalization.clone()];
            for m in &metrics {
                match row.metric(m) {
                    Some(s) => cells.extend([s.train_mean, s.train_std, s.test_mean, s.test_std].map(exact)),
                    None => cells.extend(std::iter::repeat_n(String::new(), 4)),
                }
            }
            cells.push(exact_opt(row.lor));
            cells.push(exact_opt(row.cos));
            cells.push(exact_opt(row.r2_test_mean));
            cells.push(row.status.color.as_str().to_string());
            cells.push(row.status.degenerate.to_string());
            cells.push(row.highlight.as_str().to_string());
            cells
        })
        .collect();
    csv_bytes(&header, &body)
}

pub fn folds_csv(outcome: &RunOutcome) -> Vec<u8> {
    let header = ["exp_id", "fold_index", "partition", "metric", "value"].map(String::from);
    csv_bytes(&header, &fold_rows(outcome))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("results serialize");
    text.push('\n');
    text.into_bytes()
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<PathBuf, ReportError> {
    fs::write(&path, bytes).map_err(|e| ReportError::io(&path, e))?;
    Ok(path)
}

/// Writes fold CSV, summary CSV, run metadata, the full results and the plan.
pub fn persist_results(
    outcome: &RunOutcome,
    plan: &[ExperimentSpec],
    metadata: &RunMetadata,
    out_dir: &Path,
) -> Result<PersistedPaths, ReportError> {
    fs::create_dir_all(out_dir).map_err(|e| ReportError::io(out_dir, e))?;
    Ok(PersistedPaths {
        folds: write(out_dir.join(FOLDS_FILE), &folds_csv(outcome))?,
        summary: write(out_dir.join(SUMMARY_FILE), &summary_csv(outcome))?,
        metadata: write(out_dir.join(METADATA_FILE), &json_bytes(metadata))?,
        results: write(out_dir.join(RESULTS_FILE), &json_bytes(outcome))?,
        plan: write(out_dir.join(PLAN_FILE), &json_bytes(&plan))?,
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ReportError> {
    let text = fs::read_to_string(path).map_err(|e| ReportError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| ReportError::Corrupt { path: path.to_path_buf(), message: e.to_string() })
}

/// Reads back a results directory written by [`persist_results`].
pub fn load_results(dir: &Path) -> Result<StoredResults, ReportError> {
    let results = dir.join(RESULTS_FILE);
    if !results.is_file() {
        return Err(ReportError::MissingResults(dir.to_path_buf()));
    }
    Ok(StoredResults {
        outcome: read_json(&results)?,
        plan: read_json(&dir.join(PLAN_FILE))?,
        metadata: read_json(&dir.join(METADATA_FILE))?,
    })
}
