//! Base metrics, fold aggregation and overfitting diagnostics.

mod overfit;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::TaskKind;

pub use overfit::{
    aggregate, classify_cos, classify_lor, cos, diagnostics, lor, lor_with_base, CosClass, DiagnosticsConfig,
    LorClass, MetricSummary, OverfitDiagnostics, UndefinedReason,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("R² is undefined for a constant target")]
    ConstantTarget,
    #[error("R² needs at least 2 samples")]
    TooFewSamples,
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("diagnostic undefined: {0}")]
    UndefinedDiagnostic(UndefinedReason),
    #[error("weights must be positive (alpha = {alpha}, beta = {beta})")]
    InvalidWeights { alpha: f64, beta: f64 },
}

/// Metric identifiers as they appear in plans and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Mae,
    Mse,
    Rmse,
    R2,
    Accuracy,
    F1,
    ConfusionMatrix,
}

impl MetricName {
    pub const ALL: [MetricName; 7] = [
        MetricName::Mae,
        MetricName::Mse,
        MetricName::Rmse,
        MetricName::R2,
        MetricName::Accuracy,
        MetricName::F1,
        MetricName::ConfusionMatrix,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Mae => "mae",
            MetricName::Mse => "mse",
            MetricName::Rmse => "rmse",
            MetricName::R2 => "r2",
            MetricName::Accuracy => "accuracy",
            MetricName::F1 => "f1",
            MetricName::ConfusionMatrix => "confusion_matrix",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricName::Mae => "MAE",
            MetricName::Mse => "MSE",
            MetricName::Rmse => "RMSE",
            MetricName::R2 => "R²",
            MetricName::Accuracy => "Accuracy",
            MetricName::F1 => "F1",
            MetricName::ConfusionMatrix => "Confusion matrix",
        }
    }

    pub fn task(self) -> TaskKind {
        match self {
            MetricName::Mae | MetricName::Mse | MetricName::Rmse | MetricName::R2 => TaskKind::Regression,
            MetricName::Accuracy | MetricName::F1 | MetricName::ConfusionMatrix => TaskKind::Classification,
        }
    }

    /// Scalar metrics get a value per fold and partition; the confusion
    /// matrix is stored separately on each fold record.
    pub fn is_scalar(self) -> bool {
        self != MetricName::ConfusionMatrix
    }

    /// Error-type metrics (lower is better) on which LOR and COS are defined.
    pub fn is_error_metric(self) -> bool {
        matches!(self, MetricName::Mae | MetricName::Mse | MetricName::Rmse)
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

fn check_lengths<A, B>(a: &[A], b: &[B]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    Ok(())
}

pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64, MetricError> {
    check_lengths(y_true, y_pred)?;
    Ok(y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / y_true.len() as f64)
}

pub fn mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64, MetricError> {
    check_lengths(y_true, y_pred)?;
    Ok(y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum::<f64>() / y_true.len() as f64)
}

pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64, MetricError> {
    mse(y_true, y_pred).map(f64::sqrt)
}

/// Coefficient of determination, `1 - SS_res / SS_tot`.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<f64, MetricError> {
    check_lengths(y_true, y_pred)?;
    if y_true.len() < 2 {
        return Err(MetricError::TooFewSamples);
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(MetricError::ConstantTarget);
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64, MetricError> {
    check_lengths(y_true, y_pred)?;
    let hits = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    Ok(hits as f64 / y_true.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Averaging {
    /// Class 1 is the positive class.
    Binary,
    /// Unweighted mean of per-class F1; classes with a zero denominator count as 0.
    Macro,
}

/// `matrix[i][j]` counts samples of true class `i` predicted as `j`.
pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Vec<Vec<u64>>, MetricError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricError::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    let mut matrix = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= n_classes {
                return Err(MetricError::LabelOutOfRange { label, n_classes });
            }
        }
        matrix[t][p] += 1;
    }
    Ok(matrix)
}

fn class_f1(matrix: &[Vec<u64>], class: usize) -> f64 {
    let tp = matrix[class][class] as f64;
    let fn_: f64 = matrix[class].iter().sum::<u64>() as f64 - tp;
    let fp: f64 = matrix.iter().map(|row| row[class]).sum::<u64>() as f64 - tp;
    let denom = 2.0 * tp + fp + fn_;
    if denom == 0.0 {
        0.0
    } else {
        2.0 * tp / denom
    }
}

pub fn f1(y_true: &[usize], y_pred: &[usize], averaging: F1Averaging) -> Result<f64, MetricError> {
    check_lengths(y_true, y_pred)?;
    let n_classes = y_true.iter().chain(y_pred).max().map_or(0, |m| m + 1).max(2);
    let matrix = confusion_matrix(y_true, y_pred, n_classes)?;
    Ok(match averaging {
        F1Averaging::Binary => class_f1(&matrix, 1),
        F1Averaging::Macro => (0..n_classes).map(|c| class_f1(&matrix, c)).sum::<f64>() / n_classes as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn regression_metrics() {
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mse(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mae(&[1.0], &[1.0, 2.0]), Err(MetricError::LengthMismatch { left: 1, right: 2 }));
        assert_eq!(mse(&[], &[]), Err(MetricError::EmptyInput));
    }

    #[test]
    fn r_squared_cases() {
        let y = [1.0, 2.0, 4.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        let m = 7.0 / 3.0;
        assert!(r_squared(&y, &[m, m, m]).unwrap().abs() < 1e-15);
        // SS_res = 2, SS_tot = 0.5
        assert_eq!(r_squared(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), -3.0);
        assert_eq!(r_squared(&[2.0, 2.0], &[1.0, 2.0]), Err(MetricError::ConstantTarget));
        assert_eq!(r_squared(&[2.0], &[1.0]), Err(MetricError::TooFewSamples));
    }

    #[test]
    fn classification_metrics() {
        let y = [0, 1, 1, 0];
        assert_eq!(accuracy(&y, &y).unwrap(), 1.0);
        assert_eq!(f1(&y, &y, F1Averaging::Binary).unwrap(), 1.0);
        assert_eq!(confusion_matrix(&y, &y, 2).unwrap(), vec![vec![2, 0], vec![0, 2]]);

        let t = [0, 0, 1, 1];
        let p = [0, 0, 0, 0];
        assert_eq!(accuracy(&t, &p).unwrap(), 0.5);
        assert_eq!(confusion_matrix(&t, &p, 2).unwrap(), vec![vec![2, 0], vec![2, 0]]);
        assert_eq!(f1(&t, &p, F1Averaging::Binary).unwrap(), 0.0);
        // class 0: tp 2, fp 2 -> 4/6; class 1: 0
        assert!((f1(&t, &p, F1Averaging::Macro).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        assert_eq!(accuracy(&[0, 1], &[1, 0]).unwrap(), 0.0);
        assert_eq!(
            confusion_matrix(&[0, 3], &[0, 0], 2),
            Err(MetricError::LabelOutOfRange { label: 3, n_classes: 2 })
        );
    }

    proptest! {
        #[test]
        fn r_squared_fixed_points(y in proptest::collection::vec(-100.0f64..100.0, 2..40)) {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            prop_assume!(y.iter().any(|v| (v - mean).abs() > 1e-6));
            prop_assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
            let flat = vec![mean; y.len()];
            prop_assert!(r_squared(&y, &flat).unwrap().abs() < 1e-9);
        }

        #[test]
        fn confusion_rows_count_true_classes(
            pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..60)
        ) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let m = confusion_matrix(&t, &p, 4).unwrap();
            for (class, row) in m.iter().enumerate() {
                prop_assert_eq!(row.iter().sum::<u64>() as usize, t.iter().filter(|&&c| c == class).count());
            }
            prop_assert_eq!(m.iter().flatten().sum::<u64>() as usize, t.len());
        }
    }
}
