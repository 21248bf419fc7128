//! Row status (R² colour, degeneracy) and best-row selection.

use serde::{Deserialize, Serialize};

use crate::validation::FoldRecord;
use crate::TaskKind;

/// Default relative spread below which regression predictions count as constant.
pub const DEFAULT_DEGENERACY_TOLERANCE: f64 = 0.01;
/// Test R² strictly above this is green.
pub const GREEN_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Yellow,
    Green,
    NotApplicable,
}

impl Color {
    pub fn as_str(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Yellow => "yellow",
            Color::Green => "green",
            Color::NotApplicable => "not_applicable",
        }
    }
}

/// Red below 0, yellow on `[0, 0.85]`, green above 0.85.
pub fn color_code(test_r2: Option<f64>) -> Color {
    match test_r2 {
        Some(r2) if r2.is_finite() => {
            if r2 < 0.0 {
                Color::Red
            } else if r2 <= GREEN_THRESHOLD {
                Color::Yellow
            } else {
                Color::Green
            }
        }
        _ => Color::NotApplicable,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateKind {
    ConstantRegression,
    SingleClassPrediction,
}

impl DegenerateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DegenerateKind::ConstantRegression => "constant_regression",
            DegenerateKind::SingleClassPrediction => "single_class_prediction",
        }
    }
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Whether one set of test predictions looks like a model that learned nothing.
pub fn predictions_degenerate(task: TaskKind, predictions: &[f64], truths: &[f64], tolerance: f64) -> bool {
    if predictions.is_empty() {
        return false;
    }
    match task {
        TaskKind::Classification => predictions.iter().all(|&p| p == predictions[0]),
        TaskKind::Regression => population_std(predictions) <= tolerance * population_std(truths),
    }
}

/// A model is degenerate when every fold's test predictions are degenerate.
///
/// Folds with fewer than two test rows (leave-one-out) carry no spread on
/// their own, so in that case the test predictions of all folds are pooled
/// and judged together.
pub fn detect_degenerate(folds: &[FoldRecord], task: TaskKind, tolerance: f64) -> (bool, Option<DegenerateKind>) {
    if folds.is_empty() {
        return (false, None);
    }
    let degenerate = if folds.iter().any(|f| f.test_predictions.len() < 2) {
        let preds: Vec<f64> = folds.iter().flat_map(|f| f.test_predictions.iter().copied()).collect();
        let truths: Vec<f64> = folds.iter().flat_map(|f| f.test_true.iter().copied()).collect();
        predictions_degenerate(task, &preds, &truths, tolerance)
    } else {
        folds
            .iter()
            .all(|f| predictions_degenerate(task, &f.test_predictions, &f.test_true, tolerance))
    };
    if !degenerate {
        return (false, None);
    }
    let kind = match task {
        TaskKind::Regression => DegenerateKind::ConstantRegression,
        TaskKind::Classification => DegenerateKind::SingleClassPrediction,
    };
    (true, Some(kind))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowStatus {
    pub color: Color,
    pub degenerate: bool,
    pub degenerate_kind: Option<DegenerateKind>,
    pub excluded_from_selection: bool,
}

impl RowStatus {
    /// Regression rows are eligible only when green; classification rows,
    /// which have no colour, only need to be non-degenerate.
    pub fn new(task: TaskKind, test_r2: Option<f64>, degenerate_kind: Option<DegenerateKind>) -> Self {
        let color = match task {
            TaskKind::Regression => color_code(test_r2),
            TaskKind::Classification => Color::NotApplicable,
        };
        let degenerate = degenerate_kind.is_some();
        let excluded_from_selection = degenerate
            || match task {
                TaskKind::Regression => color != Color::Green,
                TaskKind::Classification => false,
            };
        Self { color, degenerate, degenerate_kind, excluded_from_selection }
    }
}

/// Input row for [`select_best`].
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub experiment_id: String,
    pub lor: Option<f64>,
    pub cos: Option<f64>,
    /// Test mean of the diagnostic metric, used to break ties.
    pub test_metric_mean: f64,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionResult {
    pub best_lor_experiment_id: Option<String>,
    pub best_cos_experiment_id: Option<String>,
    pub eligible_ids: Vec<String>,
    pub tie_note: Option<String>,
}

fn pick<'a>(
    eligible: &[&'a Candidate],
    distance: impl Fn(&Candidate) -> Option<f64>,
    what: &str,
    notes: &mut Vec<String>,
) -> Option<&'a Candidate> {
    let mut scored: Vec<(f64, &Candidate)> = eligible.iter().filter_map(|c| distance(c).map(|d| (d, *c))).collect();
    scored.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.test_metric_mean.total_cmp(&b.1.test_metric_mean))
            .then(a.1.experiment_id.cmp(&b.1.experiment_id))
    });
    let (best_distance, best) = *scored.first()?;
    let tied: Vec<&str> = scored
        .iter()
        .filter(|(d, _)| *d == best_distance)
        .map(|(_, c)| c.experiment_id.as_str())
        .collect();
    if tied.len() > 1 {
        notes.push(format!(
            "best {what} tied between {}; chose {} by lower test metric mean, then experiment id",
            tied.join(", "),
            best.experiment_id
        ));
    }
    Some(best)
}

/// Picks the row with LOR closest to 0 and the row with COS closest to 1
/// among rows that are not excluded and have the diagnostic defined.
pub fn select_best(rows: &[Candidate]) -> SelectionResult {
    let eligible: Vec<&Candidate> = rows
        .iter()
        .filter(|c| !c.status.excluded_from_selection && (c.lor.is_some() || c.cos.is_some()))
        .collect();
    let mut notes = Vec::new();
    let best_lor = pick(&eligible, |c| c.lor.map(f64::abs), "LOR", &mut notes);
    let best_cos = pick(&eligible, |c| c.cos.map(|v| (v - 1.0).abs()), "COS", &mut notes);
    SelectionResult {
        best_lor_experiment_id: best_lor.map(|c| c.experiment_id.clone()),
        best_cos_experiment_id: best_cos.map(|c| c.experiment_id.clone()),
        eligible_ids: eligible.iter().map(|c| c.experiment_id.clone()).collect(),
        tie_note: (!notes.is_empty()).then(|| notes.join("; ")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn green() -> RowStatus {
        RowStatus::new(TaskKind::Regression, Some(0.9), None)
    }

    fn candidate(id: &str, lor: f64, cos: f64, status: RowStatus) -> Candidate {
        Candidate { experiment_id: id.into(), lor: Some(lor), cos: Some(cos), test_metric_mean: 1.0, status }
    }

    #[test]
    fn colours_at_thresholds() {
        assert_eq!(color_code(Some(-0.2)), Color::Red);
        assert_eq!(color_code(Some(0.0)), Color::Yellow);
        assert_eq!(color_code(Some(0.5)), Color::Yellow);
        assert_eq!(color_code(Some(0.85)), Color::Yellow);
        assert_eq!(color_code(Some(0.850001)), Color::Green);
        assert_eq!(color_code(Some(0.9)), Color::Green);
        assert_eq!(color_code(None), Color::NotApplicable);
        assert_eq!(color_code(Some(f64::NAN)), Color::NotApplicable);
    }

    #[test]
    fn status_exclusion() {
        assert!(RowStatus::new(TaskKind::Regression, Some(-1.0), None).excluded_from_selection);
        assert!(RowStatus::new(TaskKind::Regression, Some(0.5), None).excluded_from_selection);
        assert!(!green().excluded_from_selection);
        let clf = RowStatus::new(TaskKind::Classification, None, None);
        assert_eq!(clf.color, Color::NotApplicable);
        assert!(!clf.excluded_from_selection);
        let deg = RowStatus::new(TaskKind::Classification, None, Some(DegenerateKind::SingleClassPrediction));
        assert!(deg.excluded_from_selection && deg.degenerate);
    }

    #[test]
    fn table_three_selection() {
        let rows = vec![candidate("EX1", 0.054, 0.9, green()), candidate("EX2", 0.13, 0.80, green())];
        let sel = select_best(&rows);
        assert_eq!(sel.best_lor_experiment_id.as_deref(), Some("EX1"));
        assert_eq!(sel.best_cos_experiment_id.as_deref(), Some("EX1"));
        assert_eq!(sel.eligible_ids, vec!["EX1", "EX2"]);
        assert_eq!(sel.tie_note, None);
    }

    #[test]
    fn all_red_rows_give_no_best() {
        let red = RowStatus::new(TaskKind::Regression, Some(-0.5), None);
        let sel = select_best(&[candidate("a", 0.0, 1.0, red.clone()), candidate("b", 0.1, 1.1, red)]);
        assert_eq!(sel, SelectionResult::default());
    }

    #[test]
    fn ties_are_broken_and_reported() {
        let mut a = candidate("b", 0.1, 1.2, green());
        let mut b = candidate("a", -0.1, 1.3, green());
        a.test_metric_mean = 2.0;
        b.test_metric_mean = 2.0;
        let sel = select_best(&[a.clone(), b.clone()]);
        assert_eq!(sel.best_lor_experiment_id.as_deref(), Some("a"));
        assert!(sel.tie_note.unwrap().contains("LOR"));
        a.test_metric_mean = 1.0;
        assert_eq!(select_best(&[a, b]).best_lor_experiment_id.as_deref(), Some("b"));
    }

    #[test]
    fn marking_degenerate_only_removes_bests() {
        let rows = vec![
            candidate("a", 0.01, 1.3, green()),
            candidate("b", 0.2, 1.01, green()),
            candidate("c", 0.05, 0.9, green()),
        ];
        let before = select_best(&rows);
        for i in 0..rows.len() {
            let mut changed = rows.clone();
            changed[i].status = RowStatus::new(TaskKind::Regression, Some(0.9), Some(DegenerateKind::ConstantRegression));
            let after = select_best(&changed);
            let id = &rows[i].experiment_id;
            if before.best_lor_experiment_id.as_ref() != Some(id) {
                assert_eq!(after.best_lor_experiment_id, before.best_lor_experiment_id);
            }
            if before.best_cos_experiment_id.as_ref() != Some(id) {
                assert_eq!(after.best_cos_experiment_id, before.best_cos_experiment_id);
            }
        }
    }
}
