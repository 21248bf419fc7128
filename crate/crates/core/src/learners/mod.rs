//! Baseline learners behind one fit / predict contract.
//!
//! A [`LearnerSpec`] is a model instance: a model type, a task, named
//! hyperparameters and a seed. [`fit`] turns it into an immutable
//! [`FittedModel`]. Every learner is deterministic given its spec and data.

mod forest;
mod knn;
mod linear;
pub mod logistic;
pub mod mlp;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Matrix, TaskKind};

pub use forest::Forest;
pub use knn::KnnModel;
pub use linear::{fit_ols, fit_ridge, LinearModel};
pub use logistic::LogisticModel;
pub use mlp::{MlpModel, StopReason, TrainingTrace};
pub use tree::{Node, Tree, TreeParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("{model} does not support {task}")]
    UnsupportedTask { model: ModelType, task: TaskKind },
    #[error("feature dimension mismatch: model expects {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("{0} does not provide class probabilities")]
    UnsupportedForModel(String),
    #[error("classification label {0} is not a non-negative integer")]
    InvalidLabel(f64),
    #[error("non-finite value in training data")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelType {
    Constant,
    LinearRegression,
    RidgeRegression,
    LogisticRegression,
    Knn,
    DecisionTree,
    RandomForest,
    Mlp,
}

impl ModelType {
    pub const ALL: [ModelType; 8] = [
        ModelType::Constant,
        ModelType::LinearRegression,
        ModelType::RidgeRegression,
        ModelType::LogisticRegression,
        ModelType::Knn,
        ModelType::DecisionTree,
        ModelType::RandomForest,
        ModelType::Mlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelType::Constant => "constant",
            ModelType::LinearRegression => "linear_regression",
            ModelType::RidgeRegression => "ridge_regression",
            ModelType::LogisticRegression => "logistic_regression",
            ModelType::Knn => "knn",
            ModelType::DecisionTree => "decision_tree",
            ModelType::RandomForest => "random_forest",
            ModelType::Mlp => "mlp",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelType::Constant => "Constant",
            ModelType::LinearRegression => "Linear Regression",
            ModelType::RidgeRegression => "Ridge Regression",
            ModelType::LogisticRegression => "Logistic Regression",
            ModelType::Knn => "KNN",
            ModelType::DecisionTree => "Decision Tree",
            ModelType::RandomForest => "Random Forest",
            ModelType::Mlp => "MLP",
        }
    }

    pub fn supports(self, task: TaskKind) -> bool {
        match self {
            ModelType::LinearRegression | ModelType::RidgeRegression => task == TaskKind::Regression,
            ModelType::LogisticRegression => task == TaskKind::Classification,
            _ => true,
        }
    }

    /// Hyperparameter names and defaults. Counts are stored as reals and must
    /// be whole numbers; a `max_depth` of 0 means unlimited and a
    /// `max_features` of 0 means the task default.
    pub fn default_hyperparameters(self) -> &'static [(&'static str, f64)] {
        match self {
            ModelType::Constant | ModelType::LinearRegression => &[],
            ModelType::RidgeRegression => &[("alpha", 1.0)],
            ModelType::LogisticRegression => {
                &[("learning_rate", 0.1), ("max_iter", 1000.0), ("tol", 1e-6), ("l2", 0.0)]
            }
            ModelType::Knn => &[("k", 5.0)],
            ModelType::DecisionTree => &[("max_depth", 0.0), ("min_samples_leaf", 1.0), ("min_samples_split", 2.0)],
            ModelType::RandomForest => &[
                ("n_trees", 100.0),
                ("max_features", 0.0),
                ("bootstrap", 1.0),
                ("max_depth", 0.0),
                ("min_samples_leaf", 1.0),
                ("min_samples_split", 2.0),
            ],
            ModelType::Mlp => &[
                ("hidden_units", 16.0),
                ("learning_rate", 0.05),
                ("max_epochs", 500.0),
                ("patience", 10.0),
                ("min_delta", 1e-6),
                ("validation_fraction", 0.2),
            ],
        }
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelType::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown model type `{s}`"))
    }
}

/// A model instance: model type plus a fixed hyperparameter assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub model_type: ModelType,
    pub task_kind: TaskKind,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(model_type: ModelType, task_kind: TaskKind) -> Self {
        Self { model_type, task_kind, hyperparameters: BTreeMap::new(), seed: 0 }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.hyperparameters.insert(name.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The value of `name`, falling back to the model default.
    pub fn param(&self, name: &str) -> f64 {
        self.hyperparameters.get(name).copied().unwrap_or_else(|| {
            self.model_type
                .default_hyperparameters()
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .unwrap_or_else(|| panic!("{} has no hyperparameter {name}", self.model_type))
        })
    }

    fn count(&self, name: &str) -> usize {
        self.param(name) as usize
    }

    /// Checks the model/task combination and every hyperparameter.
    pub fn validate(&self) -> Result<(), LearnerError> {
        if !self.model_type.supports(self.task_kind) {
            return Err(LearnerError::UnsupportedTask { model: self.model_type, task: self.task_kind });
        }
        let defaults = self.model_type.default_hyperparameters();
        for (name, &value) in &self.hyperparameters {
            if !defaults.iter().any(|(n, _)| n == name) {
                let known: Vec<&str> = defaults.iter().map(|(n, _)| *n).collect();
                return Err(LearnerError::InvalidHyperparameter(format!(
                    "{} has no hyperparameter `{name}` (known: {})",
                    self.model_type,
                    if known.is_empty() { "none".to_string() } else { known.join(", ") }
                )));
            }
            if !value.is_finite() {
                return Err(LearnerError::InvalidHyperparameter(format!("`{name}` must be finite")));
            }
        }
        let bad = |name: &str, rule: &str| {
            LearnerError::InvalidHyperparameter(format!("`{name}` = {} must be {rule}", self.param(name)))
        };
        let whole = |name: &str, min: f64| {
            let v = self.param(name);
            if v.fract() != 0.0 || v < min {
                Err(bad(name, &format!("a whole number >= {min}")))
            } else {
                Ok(())
            }
        };
        let positive = |name: &str| if self.param(name) > 0.0 { Ok(()) } else { Err(bad(name, "positive")) };
        match self.model_type {
            ModelType::Constant | ModelType::LinearRegression => {}
            ModelType::RidgeRegression => {
                if self.param("alpha") < 0.0 {
                    return Err(bad("alpha", "non-negative"));
                }
            }
            ModelType::LogisticRegression => {
                positive("learning_rate")?;
                whole("max_iter", 1.0)?;
                positive("tol")?;
                if self.param("l2") < 0.0 {
                    return Err(bad("l2", "non-negative"));
                }
            }
            ModelType::Knn => whole("k", 1.0)?,
            ModelType::DecisionTree => {
                whole("max_depth", 0.0)?;
                whole("min_samples_leaf", 1.0)?;
                whole("min_samples_split", 2.0)?;
            }
            ModelType::RandomForest => {
                whole("n_trees", 1.0)?;
                whole("max_features", 0.0)?;
                let b = self.param("bootstrap");
                if b != 0.0 && b != 1.0 {
                    return Err(bad("bootstrap", "0 or 1"));
                }
                whole("max_depth", 0.0)?;
                whole("min_samples_leaf", 1.0)?;
                whole("min_samples_split", 2.0)?;
            }
            ModelType::Mlp => {
                whole("hidden_units", 1.0)?;
                positive("learning_rate")?;
                whole("max_epochs", 1.0)?;
                whole("patience", 1.0)?;
                if self.param("min_delta") < 0.0 {
                    return Err(bad("min_delta", "non-negative"));
                }
                let f = self.param("validation_fraction");
                if !(f > 0.0 && f < 1.0) {
                    return Err(bad("validation_fraction", "in (0, 1)"));
                }
            }
        }
        Ok(())
    }

    /// Short instance label, e.g. `KNN (k=3)`.
    pub fn instance_label(&self) -> String {
        if self.hyperparameters.is_empty() {
            return self.model_type.label().to_string();
        }
        let params: Vec<String> = self.hyperparameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{} ({})", self.model_type.label(), params.join(", "))
    }

    pub(crate) fn tree_params(&self) -> TreeParams {
        let depth = self.count("max_depth");
        TreeParams {
            max_depth: (depth > 0).then_some(depth),
            min_samples_leaf: self.count("min_samples_leaf"),
            min_samples_split: self.count("min_samples_split"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWarning {
    /// The least-squares system was rank deficient; the minimum-norm solution was used.
    SingularSystem,
}

/// Learned state, one variant per model type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum ModelState {
    Constant { value: f64, priors: Vec<f64> },
    Linear(LinearModel),
    Logistic(LogisticModel),
    Knn(KnnModel),
    Tree(Tree),
    Forest(Forest),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: LearnerSpec,
    pub n_features: usize,
    /// Largest training label plus one; 0 for regression.
    pub n_classes: usize,
    pub state: ModelState,
    pub training_trace: Option<TrainingTrace>,
    pub warnings: Vec<FitWarning>,
}

pub(crate) fn labels_of(target: &[f64]) -> Result<Vec<usize>, LearnerError> {
    target
        .iter()
        .map(|&v| if v >= 0.0 && v.fract() == 0.0 { Ok(v as usize) } else { Err(LearnerError::InvalidLabel(v)) })
        .collect()
}

/// Majority label; ties go to the smallest label.
pub(crate) fn majority(counts: &[f64]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

pub fn fit(spec: &LearnerSpec, features: &Matrix, target: &[f64]) -> Result<FittedModel, LearnerError> {
    spec.validate()?;
    let n = features.nrows();
    if n == 0 {
        return Err(LearnerError::InsufficientData("no training rows".into()));
    }
    if features.ncols() == 0 {
        return Err(LearnerError::InsufficientData("no feature columns".into()));
    }
    if n != target.len() {
        return Err(LearnerError::DimensionMismatch { expected: n, actual: target.len() });
    }
    if !features.as_slice().iter().chain(target).all(|v| v.is_finite()) {
        return Err(LearnerError::NonFinite);
    }
    let task = spec.task_kind;
    let (labels, n_classes) = match task {
        TaskKind::Classification => {
            let labels = labels_of(target)?;
            let n_classes = labels.iter().max().map_or(0, |m| m + 1);
            let mut seen = labels.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() < 2 && spec.model_type != ModelType::Constant {
                return Err(LearnerError::InsufficientData(
                    "classification needs at least 2 distinct classes in the training rows".into(),
                ));
            }
            (labels, n_classes)
        }
        TaskKind::Regression => (Vec::new(), 0),
    };

    let mut warnings = Vec::new();
    let mut training_trace = None;
    let state = match spec.model_type {
        ModelType::Constant => match task {
            TaskKind::Regression => ModelState::Constant { value: target.iter().sum::<f64>() / n as f64, priors: vec![] },
            TaskKind::Classification => {
                let mut counts = vec![0.0; n_classes];
                labels.iter().for_each(|&l| counts[l] += 1.0);
                let value = majority(&counts) as f64;
                ModelState::Constant { value, priors: counts.iter().map(|c| c / n as f64).collect() }
            }
        },
        ModelType::LinearRegression => {
            let (model, rank_deficient) = fit_ols(features, target);
            if rank_deficient {
                warnings.push(FitWarning::SingularSystem);
            }
            ModelState::Linear(model)
        }
        ModelType::RidgeRegression => ModelState::Linear(fit_ridge(features, target, spec.param("alpha"))),
        ModelType::LogisticRegression => ModelState::Logistic(LogisticModel::fit(
            features,
            &labels,
            n_classes,
            &logistic::GdSettings {
                learning_rate: spec.param("learning_rate"),
                max_iter: spec.count("max_iter"),
                tol: spec.param("tol"),
                l2: spec.param("l2"),
            },
        )),
        ModelType::Knn => {
            let k = spec.count("k");
            if k > n {
                return Err(LearnerError::InsufficientData(format!("k = {k} exceeds {n} training rows")));
            }
            ModelState::Knn(KnnModel::fit(features, target, k, task, n_classes))
        }
        ModelType::DecisionTree => ModelState::Tree(Tree::fit(features, target, task, n_classes, &spec.tree_params(), None)),
        ModelType::RandomForest => {
            let max_features = match spec.count("max_features") {
                0 => match task {
                    TaskKind::Classification => ((features.ncols() as f64).sqrt().ceil() as usize).max(1),
                    TaskKind::Regression => features.ncols(),
                },
                m => m.min(features.ncols()),
            };
            ModelState::Forest(Forest::fit(
                features,
                target,
                task,
                n_classes,
                &forest::ForestParams {
                    n_trees: spec.count("n_trees"),
                    max_features,
                    bootstrap: spec.param("bootstrap") == 1.0,
                    tree: spec.tree_params(),
                },
                spec.seed,
            ))
        }
        ModelType::Mlp => {
            if n < 2 {
                return Err(LearnerError::InsufficientData("mlp needs at least 2 rows for its validation split".into()));
            }
            let settings = mlp::MlpSettings {
                hidden_units: spec.count("hidden_units"),
                learning_rate: spec.param("learning_rate"),
                max_epochs: spec.count("max_epochs"),
                patience: spec.count("patience"),
                min_delta: spec.param("min_delta"),
                validation_fraction: spec.param("validation_fraction"),
                seed: spec.seed,
            };
            let (model, trace) = MlpModel::fit(features, target, task, n_classes, &settings);
            training_trace = Some(trace);
            ModelState::Mlp(model)
        }
    };

    Ok(FittedModel { spec: spec.clone(), n_features: features.ncols(), n_classes, state, training_trace, warnings })
}

impl FittedModel {
    fn check_dims(&self, features: &Matrix) -> Result<(), LearnerError> {
        if features.ncols() != self.n_features {
            return Err(LearnerError::DimensionMismatch { expected: self.n_features, actual: features.ncols() });
        }
        Ok(())
    }

    fn is_classifier(&self) -> bool {
        self.spec.task_kind == TaskKind::Classification
    }

    /// Predictions; class labels are returned as whole-number reals.
    pub fn predict(&self, features: &Matrix) -> Result<Vec<f64>, LearnerError> {
        self.check_dims(features)?;
        if self.is_classifier() {
            let proba = self.predict_proba(features)?;
            return Ok(proba.rows_iter().map(|row| majority(row) as f64).collect());
        }
        Ok(match &self.state {
            ModelState::Constant { value, .. } => vec![*value; features.nrows()],
            ModelState::Linear(m) => features.rows_iter().map(|r| m.predict_row(r)).collect(),
            ModelState::Knn(m) => features.rows_iter().map(|r| m.predict_row(r)).collect(),
            ModelState::Tree(t) => features.rows_iter().map(|r| t.predict_row(r)).collect(),
            ModelState::Forest(f) => features.rows_iter().map(|r| f.predict_row(r)).collect(),
            ModelState::Mlp(m) => m.predict_regression(features),
            ModelState::Logistic(_) => unreachable!("logistic regression is classification-only"),
        })
    }

    pub fn predict_labels(&self, features: &Matrix) -> Result<Vec<usize>, LearnerError> {
        Ok(self.predict(features)?.into_iter().map(|v| v as usize).collect())
    }

    /// Per-class probabilities, one row per sample, `n_classes` columns.
    pub fn predict_proba(&self, features: &Matrix) -> Result<Matrix, LearnerError> {
        self.check_dims(features)?;
        if !self.is_classifier() {
            return Err(LearnerError::UnsupportedForModel(format!("{} regression", self.spec.model_type)));
        }
        let k = self.n_classes;
        let mut out = Matrix::zeros(features.nrows(), k);
        for (i, row) in features.rows_iter().enumerate() {
            let p = match &self.state {
                ModelState::Constant { priors, .. } => priors.clone(),
                ModelState::Logistic(m) => m.proba_row(row),
                ModelState::Knn(m) => m.proba_row(row),
                ModelState::Tree(t) => t.proba_row(row),
                ModelState::Forest(f) => f.proba_row(row),
                ModelState::Mlp(m) => m.proba_row(row),
                ModelState::Linear(_) => unreachable!("linear models are regression-only"),
            };
            out.row_mut(i).copy_from_slice(&p);
        }
        Ok(out)
    }

    /// Model parameters as JSON, for debugging. The layout is not stable.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fitted model serializes")
    }
}
