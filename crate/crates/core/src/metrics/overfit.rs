//! Fold aggregation and the LOR / COS overfitting diagnostics.
//!
//! With error metrics averaged over folds (`train`, `test`) and their
//! sample standard deviations (`σ_train`, `σ_test`):
//!
//! ```text
//! LOR = log_b(train / test)
//! COS = α · train / test + β · σ_train / σ_test
//! ```
//!
//! LOR is 0 for an ideal model, negative under overfitting and positive under
//! underfitting. COS is 1 for an optimal model.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Why a diagnostic could not be computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndefinedReason {
    ZeroTestMean,
    ZeroTestStd,
    ZeroTrainMean,
    NonFiniteInput,
}

impl UndefinedReason {
    pub fn as_str(self) -> &'static str {
        match self {
            UndefinedReason::ZeroTestMean => "zero_test_mean",
            UndefinedReason::ZeroTestStd => "zero_test_std",
            UndefinedReason::ZeroTrainMean => "zero_train_mean",
            UndefinedReason::NonFiniteInput => "non_finite_input",
        }
    }
}

impl fmt::Display for UndefinedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fold-level dispersion summary of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric_name: String,
    #[serde(with = "crate::serde_nan::scalar")]
    pub train_mean: f64,
    #[serde(with = "crate::serde_nan::scalar")]
    pub train_std: f64,
    #[serde(with = "crate::serde_nan::scalar")]
    pub test_mean: f64,
    #[serde(with = "crate::serde_nan::scalar")]
    pub test_std: f64,
    pub n_folds: usize,
    #[serde(with = "crate::serde_nan::vec")]
    pub per_fold_train: Vec<f64>,
    #[serde(with = "crate::serde_nan::vec")]
    pub per_fold_test: Vec<f64>,
    /// Set when only one fold was available; both stds are then 0 by convention.
    pub single_fold: bool,
}

fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Unweighted fold means and sample (n − 1) standard deviations.
pub fn aggregate(per_fold_train: &[f64], per_fold_test: &[f64], metric_name: &str) -> Result<MetricSummary, MetricError> {
    if per_fold_train.len() != per_fold_test.len() {
        return Err(MetricError::LengthMismatch { left: per_fold_train.len(), right: per_fold_test.len() });
    }
    if per_fold_train.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let (train_mean, train_std) = mean_and_sample_std(per_fold_train);
    let (test_mean, test_std) = mean_and_sample_std(per_fold_test);
    Ok(MetricSummary {
        metric_name: metric_name.to_string(),
        train_mean,
        train_std,
        test_mean,
        test_std,
        n_folds: per_fold_train.len(),
        per_fold_train: per_fold_train.to_vec(),
        per_fold_test: per_fold_test.to_vec(),
        single_fold: per_fold_train.len() == 1,
    })
}

/// Base-10 LOR.
pub fn lor(train_mean: f64, test_mean: f64) -> Result<f64, MetricError> {
    lor_with_base(train_mean, test_mean, 10.0)
}

pub fn lor_with_base(train_mean: f64, test_mean: f64, base: f64) -> Result<f64, MetricError> {
    if !train_mean.is_finite() || !test_mean.is_finite() {
        return Err(MetricError::UndefinedDiagnostic(UndefinedReason::NonFiniteInput));
    }
    if test_mean <= 0.0 {
        return Err(MetricError::UndefinedDiagnostic(UndefinedReason::ZeroTestMean));
    }
    if train_mean <= 0.0 {
        return Err(MetricError::UndefinedDiagnostic(UndefinedReason::ZeroTrainMean));
    }
    Ok((train_mean / test_mean).log(base))
}

pub fn cos(train_mean: f64, test_mean: f64, train_std: f64, test_std: f64, alpha: f64, beta: f64) -> Result<f64, MetricError> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(MetricError::InvalidWeights { alpha, beta });
    }
    if ![train_mean, test_mean, train_std, test_std].iter().all(|v| v.is_finite()) {
        return Err(MetricError::UndefinedDiagnostic(UndefinedReason::NonFiniteInput));
    }
    if test_mean <= 0.0 {
        return Err(MetricError::UndefinedDiagnostic(UndefinedReason::ZeroTestMean));
    }
    if test_std <= 0.0 {
        return Err(MetricError::UndefinedDiagnostic(UndefinedReason::ZeroTestStd));
    }
    Ok(alpha * (train_mean / test_mean) + beta * (train_std / test_std))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LorClass {
    Ideal,
    Overfitting,
    Underfitting,
    Undefined,
}

impl LorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LorClass::Ideal => "ideal",
            LorClass::Overfitting => "overfitting",
            LorClass::Underfitting => "underfitting",
            LorClass::Undefined => "undefined",
        }
    }
}

pub fn classify_lor(lor_value: f64, epsilon_ideal: f64) -> LorClass {
    if !lor_value.is_finite() {
        LorClass::Undefined
    } else if lor_value.abs() <= epsilon_ideal {
        LorClass::Ideal
    } else if lor_value < 0.0 {
        LorClass::Overfitting
    } else {
        LorClass::Underfitting
    }
}

/// Qualitative COS label, worded as in the usual COS reading:
/// above 1 reads as overfitting, below 1 as underfitting.
///
/// Note that with train error below test error LOR reports overfitting while
/// COS falls below 1; the two labels are reported side by side and not
/// reconciled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CosClass {
    Optimal,
    Overfitting,
    Underfitting,
    Undefined,
}

impl CosClass {
    pub fn as_str(self) -> &'static str {
        match self {
            CosClass::Optimal => "optimal",
            CosClass::Overfitting => "overfitting",
            CosClass::Underfitting => "underfitting",
            CosClass::Undefined => "undefined",
        }
    }
}

pub fn classify_cos(cos_value: f64, epsilon: f64) -> CosClass {
    if !cos_value.is_finite() {
        CosClass::Undefined
    } else if (cos_value - 1.0).abs() <= epsilon {
        CosClass::Optimal
    } else if cos_value > 1.0 {
        CosClass::Overfitting
    } else {
        CosClass::Underfitting
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon_ideal: f64,
    pub log_base: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.5, epsilon_ideal: 0.02, log_base: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverfitDiagnostics {
    pub metric_name: String,
    pub lor: Option<f64>,
    pub cos: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub lor_class: LorClass,
    pub cos_class: CosClass,
    /// `cos - 1`, signed.
    pub cos_deviation: Option<f64>,
    pub lor_undefined: Option<UndefinedReason>,
    pub cos_undefined: Option<UndefinedReason>,
}

impl OverfitDiagnostics {
    pub fn is_defined(&self) -> bool {
        self.lor.is_some() && self.cos.is_some()
    }
}

fn reason(err: MetricError) -> UndefinedReason {
    match err {
        MetricError::UndefinedDiagnostic(r) => r,
        _ => UndefinedReason::NonFiniteInput,
    }
}

pub fn diagnostics(summary: &MetricSummary, config: &DiagnosticsConfig) -> OverfitDiagnostics {
    let lor = lor_with_base(summary.train_mean, summary.test_mean, config.log_base);
    let cos = cos(summary.train_mean, summary.test_mean, summary.train_std, summary.test_std, config.alpha, config.beta);
    let (lor, lor_undefined) = match lor {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(reason(e))),
    };
    let (cos, cos_undefined) = match cos {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(reason(e))),
    };
    OverfitDiagnostics {
        metric_name: summary.metric_name.clone(),
        lor,
        cos,
        alpha: config.alpha,
        beta: config.beta,
        lor_class: lor.map_or(LorClass::Undefined, |v| classify_lor(v, config.epsilon_ideal)),
        cos_class: cos.map_or(CosClass::Undefined, |v| classify_cos(v, config.epsilon_ideal)),
        cos_deviation: cos.map(|c| c - 1.0),
        lor_undefined,
        cos_undefined,
    }
}
