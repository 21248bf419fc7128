//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on validation or run failures, 2 on I/O failures.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{apply_transform, fit_transform, load_csv, save_snapshot, DatasetError, TransformKind, TransformScope};
use crate::plan::{PlanError, PlanFile};
use crate::reporting::{
    emit_plots, load_results, persist_results, render_document, render_plan_table, render_results_table, report_rows,
    ReportDocument, ReportError, RunMetadata, TableFormat, FOLDS_FILE, STD_CONVENTION, SUMMARY_FILE,
};
use crate::runner::{run_all, RunOutcome};
use crate::{TaskKind, TOOL_VERSION};

#[derive(Debug, Parser)]
#[command(name = "mlbaseline", version, about = "Reproducible cross-validated ML baselines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan file operations.
    Plan {
        #[command(subcommand)]
        action: PlanAction,
    },
    /// Dataset snapshot operations.
    Data {
        #[command(subcommand)]
        action: DataAction,
    },
    /// Run every experiment of a plan and store the results.
    Run(RunArgs),
    /// Render tables and plots from a results directory.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum PlanAction {
    /// Check a plan and list every problem found.
    Validate {
        #[arg(long)]
        plan: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum DataAction {
    /// Import a CSV file as a snapshot, optionally applying transforms.
    Snapshot(SnapshotArgs),
}

#[derive(Debug, Args)]
pub struct SnapshotArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub target: String,
    #[arg(long, value_parser = parse_task)]
    pub task: TaskKind,
    /// Transform to apply, in order; repeatable.
    #[arg(long = "transform", value_parser = parse_transform)]
    pub transforms: Vec<TransformKind>,
    #[arg(long, value_parser = parse_scope, default_value = "global")]
    pub scope: TransformScope,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Root seed; overrides the plan default and per-experiment seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum experiments and folds run at once (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Markdown,
    Csv,
    Html,
    All,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Results directory written by `run`; the report goes to `<out>/report`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: FormatArg,
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse()
}

fn parse_transform(s: &str) -> Result<TransformKind, String> {
    s.parse()
}

fn parse_scope(s: &str) -> Result<TransformScope, String> {
    s.parse()
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::Io { .. } => Failure::io(e.to_string()),
            _ => Failure::validation(e.to_string()),
        }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } | DatasetError::FileNotFound(_) => Failure::io(e.to_string()),
            _ => Failure::validation(e.to_string()),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io { .. } => Failure::io(e.to_string()),
            _ => Failure::validation(e.to_string()),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<'a, I, T>(args: I, out: &'a mut dyn Write, err: &'a mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let sink = if code == 0 { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(err, "error: {}", failure.message);
            failure.code
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Plan { action: PlanAction::Validate { plan } } => cmd_plan_validate(&plan, out),
        Command::Data { action: DataAction::Snapshot(args) } => cmd_data_snapshot(&args, out),
        Command::Run(args) => cmd_run(&args, out, err),
        Command::Report(args) => cmd_report(&args, out, err),
    }
}

pub fn cmd_plan_validate(path: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let plan = PlanFile::load(path)?;
    let unresolved = plan.unresolved_datasets();
    if !unresolved.is_empty() {
        return Err(PlanError::Invalid(unresolved).into());
    }
    let _ = writeln!(out, "{} experiments, OK", plan.experiments.len());
    Ok(0)
}

pub fn cmd_data_snapshot(args: &SnapshotArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut snapshot = load_csv(&args.input, &args.target, args.task)?;
    let mut manifest = save_snapshot(&snapshot, &args.out)?;
    for &kind in &args.transforms {
        if args.scope == TransformScope::PerFold && kind.learns_statistics() {
            return Err(Failure::validation(format!(
                "transform {kind} with per-fold scope must be declared in the plan, not baked into a snapshot"
            )));
        }
        let spec = fit_transform(&snapshot, kind, args.scope, None)?;
        snapshot = apply_transform(&snapshot, &spec)?;
        manifest = save_snapshot(&snapshot, &args.out)?;
    }
    let _ = writeln!(out, "{}", snapshot.snapshot_id());
    let _ = writeln!(out, "manifest: {}", manifest.display());
    Ok(0)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let plan = PlanFile::load(&args.plan)?;
    let snapshots = plan.load_snapshots()?;
    let specs = plan.experiment_specs(args.seed);
    let config = plan.diagnostics_config();
    let started_at = now();
    let pairs: Vec<_> = specs.iter().cloned().zip(snapshots.iter().cloned()).collect();
    let outcome = run_all(args.jobs, &pairs, &config);
    let finished_at = now();

    let mut snapshot_ids: Vec<String> = Vec::new();
    for s in &snapshots {
        if !snapshot_ids.iter().any(|id| id == s.snapshot_id()) {
            snapshot_ids.push(s.snapshot_id().to_string());
        }
    }
    let metadata = RunMetadata {
        root_seed: plan.effective_seed(args.seed),
        log_base: config.log_base,
        alpha: config.alpha,
        beta: config.beta,
        epsilon_ideal: config.epsilon_ideal,
        std_convention: STD_CONVENTION.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        snapshot_ids,
        started_at,
        finished_at,
    };
    persist_results(&outcome, &specs, &metadata, &args.out)?;

    for spec in &specs {
        let id = &spec.experiment_id;
        if let Some(r) = outcome.results.iter().find(|r| &r.spec.experiment_id == id) {
            let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
            let mut line = format!("{id}: ok, lor={}, cos={}", fmt(r.diagnostics.lor), fmt(r.diagnostics.cos));
            if let Some(kind) = r.degenerate_kind {
                line.push_str(&format!(", degenerate ({})", kind.as_str()));
            }
            let _ = writeln!(out, "{line}");
        } else if let Some(f) = outcome.failures.iter().find(|f| &f.experiment_id == id) {
            let _ = writeln!(out, "{id}: FAILED");
            let _ = writeln!(err, "{id}: {}", f.message);
        }
    }
    Ok(if outcome.failures.is_empty() { 0 } else { 1 })
}

/// Remarks for the report: mixed metrics, selection ties, fold-size caveats.
pub fn report_notes(outcome: &RunOutcome) -> Vec<String> {
    let mut notes = Vec::new();
    for task in [TaskKind::Regression, TaskKind::Classification] {
        let metric_sets: BTreeSet<Vec<&str>> = outcome
            .results
            .iter()
            .filter(|r| r.spec.task == task)
            .map(|r| r.spec.metric_names.iter().map(|m| m.as_str()).collect())
            .collect();
        if metric_sets.len() > 1 {
            notes.push(format!(
                "{} experiments use different metrics; compare models on a uniform metric",
                task.label()
            ));
        }
        if let Some(tie) = outcome.selection.get(&task).and_then(|s| s.tie_note.as_ref()) {
            notes.push(format!("{}: {tie}", task.label()));
        }
    }
    for r in &outcome.results {
        if r.unequal_fold_sizes {
            notes.push(format!(
                "{}: test folds differ in size; fold means are unweighted",
                r.spec.experiment_id
            ));
        }
        if r.diagnostic_summary.single_fold {
            notes.push(format!("{}: single fold, standard deviations reported as 0", r.spec.experiment_id));
        }
        let d = &r.diagnostics;
        let undefined: Vec<String> = [("LOR", d.lor_undefined), ("COS", d.cos_undefined)]
            .into_iter()
            .filter_map(|(name, reason)| reason.map(|why| format!("{name} undefined ({})", why.as_str())))
            .collect();
        if !undefined.is_empty() {
            notes.push(format!("{}: {} on `{}`", r.spec.experiment_id, undefined.join(", "), d.metric_name));
        }
    }
    notes
}

fn write_file(path: PathBuf, body: &str) -> Result<PathBuf, Failure> {
    fs::write(&path, body).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let stored = load_results(&args.out)?;
    let outcome = &stored.outcome;
    let rows = report_rows(outcome);
    let notes = report_notes(outcome);
    for note in notes.iter().filter(|n| n.contains("different metrics")) {
        let _ = writeln!(err, "warning: {note}");
    }

    let report_dir = args.out.join("report");
    let plot_dir = report_dir.join("plots");
    let plots = emit_plots(&outcome.results, &[], &plot_dir)?;
    let appendix: Vec<(String, Vec<String>)> = outcome
        .results
        .iter()
        .map(|r| {
            let stem = format!("{}_", crate::reporting::file_safe(&r.spec.experiment_id));
            let mut files = vec![format!("../{FOLDS_FILE}"), format!("../{SUMMARY_FILE}")];
            files.extend(
                plots
                    .iter()
                    .filter_map(|p| p.file_name().and_then(|n| n.to_str()))
                    .filter(|n| n.starts_with(&stem))
                    .map(|n| format!("plots/{n}")),
            );
            (r.spec.experiment_id.clone(), files)
        })
        .collect();

    let formats: &[TableFormat] = match args.format {
        FormatArg::Markdown => &[TableFormat::Markdown],
        FormatArg::Csv => &[TableFormat::Csv],
        FormatArg::Html => &[TableFormat::Html],
        FormatArg::All => &[TableFormat::Markdown, TableFormat::Csv, TableFormat::Html],
    };
    let mut written = Vec::new();
    for &format in formats {
        match format {
            TableFormat::Markdown => {
                let doc = ReportDocument {
                    plan: stored.plan.clone(),
                    rows: rows.clone(),
                    failures: outcome.failures.clone(),
                    metadata: stored.metadata.clone(),
                    notes: notes.clone(),
                    appendix: appendix.clone(),
                };
                written.push(write_file(report_dir.join("report.md"), &render_document(&doc)?)?);
            }
            other => {
                let ext = other.extension();
                if !rows.is_empty() || other == TableFormat::Csv {
                    written.push(write_file(report_dir.join(format!("results.{ext}")), &render_results_table(&rows, other)?)?);
                }
                written.push(write_file(report_dir.join(format!("plan.{ext}")), &render_plan_table(&stored.plan, other)?)?);
            }
        }
    }
    for path in written.iter().chain(&plots) {
        let _ = writeln!(out, "{}", path.display());
    }
    Ok(0)
}
