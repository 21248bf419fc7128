//! Self-contained SVG plots and confusion-matrix tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::format::sig3;
use super::ReportError;
use crate::learners::TrainingTrace;
use crate::runner::ExperimentResult;
use crate::TaskKind;

const SIZE: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.lo) / (self.hi - self.lo) * (SIZE - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        SIZE - MARGIN - (v - self.lo) / (self.hi - self.lo) * (SIZE - 2.0 * MARGIN)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, xa: &Axis, ya: &Axis) {
    let (lo, hi) = (MARGIN, SIZE - MARGIN);
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(out, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="25" text-anchor="middle" font-size="14">{}</text>"#, SIZE / 2.0, xml_escape(title));
    let _ = writeln!(out, r#"<line x1="{lo}" y1="{hi}" x2="{hi}" y2="{hi}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{lo}" y1="{lo}" x2="{lo}" y2="{hi}" stroke="black"/>"#);
    for (v, anchor) in [(xa.lo, "start"), (xa.hi, "end")] {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="{anchor}" font-size="10">{}</text>"#, xa.x(v), hi + 15.0, sig3(v));
    }
    for v in [ya.lo, ya.hi] {
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#, lo - 5.0, ya.y(v), sig3(v));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, SIZE / 2.0, SIZE - 12.0, xml_escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="15" y="{0}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {0})">{1}</text>"#,
        SIZE / 2.0,
        xml_escape(y_label)
    );
}

/// Predicted against true values on a square plot with shared ranges, so
/// perfect predictions sit on the drawn identity line.
pub fn scatter_svg(title: &str, truth: &[f64], predicted: &[f64]) -> String {
    let (lo, hi) = range(truth.iter().chain(predicted).copied());
    let axis = Axis { lo, hi };
    let mut out = String::new();
    frame(&mut out, title, "True value", "Predicted value", &axis, &axis);
    let _ = writeln!(
        out,
        r#"<line class="identity" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
        axis.x(lo),
        axis.y(lo),
        axis.x(hi),
        axis.y(hi)
    );
    for (&t, &p) in truth.iter().zip(predicted) {
        if t.is_finite() && p.is_finite() {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, axis.x(t), axis.y(p));
        }
    }
    out.push_str("</svg>\n");
    out
}

fn polyline(out: &mut String, class: &str, colour: &str, values: &[f64], xa: &Axis, ya: &Axis) {
    let points: Vec<String> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, &v)| format!("{:.2},{:.2}", xa.x((i + 1) as f64), ya.y(v)))
        .collect();
    let _ = writeln!(out, r#"<polyline class="{class}" fill="none" stroke="{colour}" points="{}"/>"#, points.join(" "));
}

/// Training and validation loss per epoch, one vertex per epoch run.
pub fn loss_svg(title: &str, trace: &TrainingTrace) -> String {
    let epochs = trace.train_loss.len().max(trace.validation_loss.len()).max(1);
    let xa = Axis { lo: 1.0, hi: if epochs > 1 { epochs as f64 } else { 2.0 } };
    let (lo, hi) = range(trace.train_loss.iter().chain(&trace.validation_loss).copied());
    let ya = Axis { lo, hi };
    let mut out = String::new();
    frame(&mut out, title, "Epoch", "Loss", &xa, &ya);
    polyline(&mut out, "train", "steelblue", &trace.train_loss, &xa, &ya);
    polyline(&mut out, "validation", "darkorange", &trace.validation_loss, &xa, &ya);
    let _ = writeln!(out, r#"<text x="{}" y="45" font-size="10" fill="steelblue">train</text>"#, SIZE - MARGIN - 70.0);
    let _ = writeln!(out, r#"<text x="{}" y="45" font-size="10" fill="darkorange">validation</text>"#, SIZE - MARGIN - 40.0);
    out.push_str("</svg>\n");
    out
}

/// Markdown confusion matrix; rows are true classes, columns predictions.
pub fn confusion_markdown(matrix: &[Vec<u64>], class_names: &[String]) -> String {
    let name = |i: usize| class_names.get(i).cloned().unwrap_or_else(|| i.to_string());
    let mut out = String::from("| true \\ predicted |");
    for j in 0..matrix.len() {
        let _ = write!(out, " {} |", name(j));
    }
    out.push_str("\n| --- |");
    out.push_str(&" --- |".repeat(matrix.len()));
    out.push('\n');
    for (i, row) in matrix.iter().enumerate() {
        let _ = write!(out, "| {} |", name(i));
        for v in row {
            let _ = write!(out, " {v} |");
        }
        out.push('\n');
    }
    out
}

/// Test confusion matrices summed over folds.
pub fn summed_test_confusion(result: &ExperimentResult) -> Option<Vec<Vec<u64>>> {
    let mut total: Option<Vec<Vec<u64>>> = None;
    for fold in &result.folds {
        let cm = fold.test_confusion.as_ref()?;
        match &mut total {
            None => total = Some(cm.clone()),
            Some(t) => {
                for (tr, cr) in t.iter_mut().zip(cm) {
                    for (a, b) in tr.iter_mut().zip(cr) {
                        *a += b;
                    }
                }
            }
        }
    }
    total
}

pub(crate) fn file_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Writes the per-experiment plots into `out_dir` and returns their paths.
pub fn emit_plots(results: &[ExperimentResult], class_names: &[Vec<String>], out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(out_dir).map_err(|e| ReportError::io(out_dir, e))?;
    let mut paths = Vec::new();
    let mut emit = |name: String, body: String| -> Result<(), ReportError> {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| ReportError::io(&path, e))?;
        paths.push(path);
        Ok(())
    };
    for (i, result) in results.iter().enumerate() {
        let id = &result.spec.experiment_id;
        let stem = file_safe(id);
        match result.spec.task {
            TaskKind::Regression => {
                let truth: Vec<f64> = result.folds.iter().flat_map(|f| f.test_true.iter().copied()).collect();
                let pred: Vec<f64> = result.folds.iter().flat_map(|f| f.test_predictions.iter().copied()).collect();
                emit(format!("{stem}_scatter.svg"), scatter_svg(&format!("{id}: predicted vs true (test)"), &truth, &pred))?;
            }
            TaskKind::Classification => {
                if let Some(cm) = summed_test_confusion(result) {
                    let names = class_names.get(i).map(Vec::as_slice).unwrap_or(&[]);
                    let body = format!("# {id}: test confusion matrix (summed over folds)\n\n{}", confusion_markdown(&cm, names));
                    emit(format!("{stem}_confusion.md"), body)?;
                }
            }
        }
        for fold in &result.folds {
            if let Some(trace) = &fold.training_trace {
                let title = format!("{id}: loss, fold {}", fold.fold_index);
                emit(format!("{stem}_loss_fold{}.svg", fold.fold_index), loss_svg(&title, trace))?;
            }
        }
    }
    Ok(paths)
}
