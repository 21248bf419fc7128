use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Identity,
    MaxNormalize,
    MinMax,
    ZScore,
    LinearDetrend,
}

impl TransformKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformKind::Identity => "identity",
            TransformKind::MaxNormalize => "max_normalize",
            TransformKind::MinMax => "min_max",
            TransformKind::ZScore => "z_score",
            TransformKind::LinearDetrend => "linear_detrend",
        }
    }

    /// True for transforms that learn per-feature statistics from data.
    pub fn learns_statistics(self) -> bool {
        matches!(self, TransformKind::MaxNormalize | TransformKind::MinMax | TransformKind::ZScore)
    }

    /// Scaling transforms go in the "Normal." column of the tables, the
    /// others in "Preproc.".
    pub fn is_normalization(self) -> bool {
        self.learns_statistics()
    }

    /// Human-readable label used in plan and result tables.
    pub fn label(self) -> &'static str {
        match self {
            TransformKind::Identity => "Raw",
            TransformKind::MaxNormalize => "max = 1",
            TransformKind::MinMax => "min-max",
            TransformKind::ZScore => "z-score",
            TransformKind::LinearDetrend => "Baseline removed",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransformKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "identity" => TransformKind::Identity,
            "max_normalize" => TransformKind::MaxNormalize,
            "min_max" => TransformKind::MinMax,
            "z_score" => TransformKind::ZScore,
            "linear_detrend" => TransformKind::LinearDetrend,
            other => return Err(format!("unknown transform `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformScope {
    Global,
    #[default]
    PerFold,
}

impl TransformScope {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformScope::Global => "global",
            TransformScope::PerFold => "per_fold",
        }
    }
}

impl FromStr for TransformScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global" => Ok(TransformScope::Global),
            "per_fold" | "per-fold" => Ok(TransformScope::PerFold),
            other => Err(format!("unknown transform scope `{other}`")),
        }
    }
}

/// A transform together with its fitted parameters.
///
/// Parameters are keyed by statistic name and hold one value per feature:
/// `max_abs` for `max_normalize`, `min`/`max` for `min_max`, `mean`/`std` for
/// `z_score`. `linear_detrend` fits its line per row at application time and
/// only records the feature count it was fitted for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub scope: TransformScope,
    pub parameters: BTreeMap<String, Vec<f64>>,
    pub fitted: bool,
}

impl TransformSpec {
    pub fn unfitted(kind: TransformKind, scope: TransformScope) -> Self {
        Self { kind, scope, parameters: BTreeMap::new(), fitted: false }
    }

    /// Fits the transform on the rows of `features` listed in `rows` (all rows when `None`).
    pub fn fit(
        kind: TransformKind,
        scope: TransformScope,
        features: &Matrix,
        feature_names: &[String],
        rows: Option<&[usize]>,
    ) -> Result<Self, DatasetError> {
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => {
                if r.is_empty() {
                    return Err(DatasetError::InvalidRowSubset("row subset is empty".into()));
                }
                if let Some(&bad) = r.iter().find(|&&i| i >= features.nrows()) {
                    return Err(DatasetError::InvalidRowSubset(format!(
                        "row {bad} out of range for {} rows",
                        features.nrows()
                    )));
                }
                r
            }
            None => {
                all = (0..features.nrows()).collect();
                &all
            }
        };
        let p = features.ncols();
        let name = |j: usize| feature_names.get(j).cloned().unwrap_or_else(|| format!("#{j}"));
        let degenerate = |j: usize, reason: &str| DatasetError::DegenerateStatistic {
            kind,
            feature: name(j),
            reason: reason.to_string(),
        };

        let mut parameters = BTreeMap::new();
        match kind {
            TransformKind::Identity => {}
            TransformKind::MaxNormalize => {
                let mut max_abs = vec![0.0f64; p];
                for &i in rows {
                    for (m, v) in max_abs.iter_mut().zip(features.row(i)) {
                        *m = m.max(v.abs());
                    }
                }
                if let Some(j) = max_abs.iter().position(|&m| m == 0.0) {
                    return Err(degenerate(j, "maximum absolute value is 0"));
                }
                parameters.insert("max_abs".to_string(), max_abs);
            }
            TransformKind::MinMax => {
                let mut min = vec![f64::INFINITY; p];
                let mut max = vec![f64::NEG_INFINITY; p];
                for &i in rows {
                    for (j, &v) in features.row(i).iter().enumerate() {
                        min[j] = min[j].min(v);
                        max[j] = max[j].max(v);
                    }
                }
                if let Some(j) = (0..p).find(|&j| max[j] == min[j]) {
                    return Err(degenerate(j, "max equals min"));
                }
                parameters.insert("min".to_string(), min);
                parameters.insert("max".to_string(), max);
            }
            TransformKind::ZScore => {
                let n = rows.len() as f64;
                let mut mean = vec![0.0; p];
                for &i in rows {
                    for (m, v) in mean.iter_mut().zip(features.row(i)) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                let mut var = vec![0.0; p];
                for &i in rows {
                    for (j, v) in features.row(i).iter().enumerate() {
                        var[j] += (v - mean[j]).powi(2);
                    }
                }
                let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
                if let Some(j) = std.iter().position(|&s| s == 0.0) {
                    return Err(degenerate(j, "standard deviation is 0"));
                }
                parameters.insert("mean".to_string(), mean);
                parameters.insert("std".to_string(), std);
            }
            TransformKind::LinearDetrend => {
                if p < 2 {
                    return Err(degenerate(0, "a per-row line needs at least 2 features"));
                }
                parameters.insert("n_features".to_string(), vec![p as f64]);
            }
        }
        Ok(Self { kind, scope, parameters, fitted: true })
    }

    /// Number of features this spec was fitted for; `None` for identity.
    pub fn fitted_dimension(&self) -> Option<usize> {
        match self.kind {
            TransformKind::Identity => None,
            TransformKind::MaxNormalize => self.parameters.get("max_abs").map(Vec::len),
            TransformKind::MinMax => self.parameters.get("min").map(Vec::len),
            TransformKind::ZScore => self.parameters.get("mean").map(Vec::len),
            TransformKind::LinearDetrend => self.parameters.get("n_features").and_then(|v| v.first()).map(|&n| n as usize),
        }
    }

    fn param(&self, name: &str) -> Result<&[f64], DatasetError> {
        self.parameters
            .get(name)
            .map(Vec::as_slice)
            .ok_or(DatasetError::UnfittedTransform(self.kind))
    }

    /// Applies the fitted transform to every row of `features`.
    pub fn apply(&self, features: &Matrix) -> Result<Matrix, DatasetError> {
        if !self.fitted {
            return Err(DatasetError::UnfittedTransform(self.kind));
        }
        if let Some(expected) = self.fitted_dimension() {
            if expected != features.ncols() {
                return Err(DatasetError::DimensionMismatch { expected, actual: features.ncols() });
            }
        }
        let mut out = features.clone();
        match self.kind {
            TransformKind::Identity => {}
            TransformKind::MaxNormalize => {
                let max_abs = self.param("max_abs")?;
                for i in 0..out.nrows() {
                    for (v, m) in out.row_mut(i).iter_mut().zip(max_abs) {
                        *v /= m;
                    }
                }
            }
            TransformKind::MinMax => {
                let (min, max) = (self.param("min")?, self.param("max")?);
                for i in 0..out.nrows() {
                    for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                        *v = (*v - min[j]) / (max[j] - min[j]);
                    }
                }
            }
            TransformKind::ZScore => {
                let (mean, std) = (self.param("mean")?, self.param("std")?);
                for i in 0..out.nrows() {
                    for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                        *v = (*v - mean[j]) / std[j];
                    }
                }
            }
            TransformKind::LinearDetrend => {
                for i in 0..out.nrows() {
                    detrend_row(out.row_mut(i));
                }
            }
        }
        Ok(out)
    }
}

/// Subtracts the least-squares line through `(j, row[j])` from `row`.
pub fn detrend_row(row: &mut [f64]) {
    let n = row.len();
    if n == 0 {
        return;
    }
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let y_mean = row.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (j, &y) in row.iter().enumerate() {
        let dx = j as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = y_mean - slope * x_mean;
    for (j, y) in row.iter_mut().enumerate() {
        *y -= intercept + slope * j as f64;
    }
}
