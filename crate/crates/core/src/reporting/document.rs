use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::tables::TableFormat;
use super::{render_plan_table, render_results_table, ReportError, ReportRow};
use crate::runner::ExperimentFailure;
use crate::validation::ExperimentSpec;

pub const STD_CONVENTION: &str = "sample (n-1) standard deviation across folds";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub root_seed: Option<u64>,
    pub log_base: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon_ideal: f64,
    pub std_convention: String,
    pub tool_version: String,
    pub snapshot_ids: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
}

/// A complete human-readable report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportDocument {
    pub plan: Vec<ExperimentSpec>,
    pub rows: Vec<ReportRow>,
    pub failures: Vec<ExperimentFailure>,
    pub metadata: RunMetadata,
    /// Free-form remarks: selection ties, unequal fold sizes, mixed metrics.
    pub notes: Vec<String>,
    /// Per-experiment appendix file references, relative to the report.
    pub appendix: Vec<(String, Vec<String>)>,
}

/// Markdown report. Timestamps stay in the metadata file so reruns of the
/// same plan give identical reports.
pub fn render_document(doc: &ReportDocument) -> Result<String, ReportError> {
    let mut out = String::from("# Experiment report\n\n## Plan\n\n");
    out.push_str(&render_plan_table(&doc.plan, TableFormat::Markdown)?);
    out.push_str("\n## Results\n\n");
    if doc.rows.is_empty() {
        out.push_str("No experiment completed.\n");
    } else {
        out.push_str(&render_results_table(&doc.rows, TableFormat::Markdown)?);
        out.push_str(
            "\nBold: LOR closest to 0. Bold italic: COS closest to 1 (or both). \
             Degenerate rows and regression rows that are not green are excluded from selection.\n",
        );
    }
    if !doc.notes.is_empty() {
        out.push_str("\n## Notes\n\n");
        for note in &doc.notes {
            let _ = writeln!(out, "- {note}");
        }
    }
    if !doc.failures.is_empty() {
        out.push_str("\n## Failed experiments\n\n");
        for f in &doc.failures {
            let _ = writeln!(out, "- {}: {}", f.experiment_id, f.message.replace('\n', " "));
        }
    }
    let m = &doc.metadata;
    out.push_str("\n## Run settings\n\n");
    let seed = m.root_seed.map_or_else(|| "per experiment".to_string(), |s| s.to_string());
    let _ = writeln!(out, "- root seed: {seed}");
    let _ = writeln!(out, "- LOR log base: {}", m.log_base);
    let _ = writeln!(out, "- COS weights: alpha = {}, beta = {}", m.alpha, m.beta);
    let _ = writeln!(out, "- epsilon_ideal: {}", m.epsilon_ideal);
    let _ = writeln!(out, "- spread: {}", m.std_convention);
    let _ = writeln!(out, "- tool: {}", m.tool_version);
    let _ = writeln!(out, "- snapshots: {}", m.snapshot_ids.join(", "));
    if !doc.appendix.is_empty() {
        out.push_str("\n## Appendix\n\n");
        for (id, files) in &doc.appendix {
            let links: Vec<String> = files.iter().map(|f| format!("[{f}]({f})")).collect();
            let _ = writeln!(out, "- {id}: {}", links.join(", "));
        }
    }
    Ok(out)
}
