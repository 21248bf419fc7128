use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{make_splits, FoldAssignment, SplitPlan, ValidationError};
use crate::dataset::{apply_transform, DatasetSnapshot, TransformKind, TransformScope, TransformSpec};
use crate::learners::{fit, FitWarning, LearnerSpec, TrainingTrace};
use crate::metrics::{self, F1Averaging, MetricError, MetricName};
use crate::rng::mix;
use crate::selection::{predictions_degenerate, DEFAULT_DEGENERACY_TOLERANCE};
use crate::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessingStep {
    pub kind: TransformKind,
    #[serde(default)]
    pub scope: TransformScope,
}

/// One row of the experiment plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment_id: String,
    pub task: TaskKind,
    /// Snapshot id, manifest path or plan alias.
    pub dataset_ref: String,
    pub preprocessing: Vec<PreprocessingStep>,
    pub learner: LearnerSpec,
    pub metric_names: Vec<MetricName>,
    pub split_plan: SplitPlan,
    #[serde(default)]
    pub notes: String,
}

impl ExperimentSpec {
    /// All problems with the spec, in a stable order. Empty means valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.experiment_id.trim().is_empty() {
            out.push("experiment id is empty".to_string());
        }
        if self.metric_names.is_empty() {
            out.push("no metrics requested".to_string());
        }
        for m in &self.metric_names {
            if m.task() != self.task {
                out.push(format!("metric `{m}` is a {} metric but the task is {}", m.task(), self.task));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for m in &self.metric_names {
            if !seen.insert(m) {
                out.push(format!("metric `{m}` requested twice"));
            }
        }
        let has_error_metric = self.metric_names.iter().any(|m| m.is_error_metric());
        if self.task == TaskKind::Regression && !self.metric_names.is_empty() && !has_error_metric {
            out.push("regression experiments need mae, mse or rmse for the overfitting diagnostics".to_string());
        }
        if self.learner.task_kind != self.task {
            out.push(format!("learner task {} differs from experiment task {}", self.learner.task_kind, self.task));
        }
        if let Err(e) = self.learner.validate() {
            out.push(e.to_string());
        }
        if let Err(e) = self.split_plan.validate() {
            out.push(e.to_string());
        }
        if self.split_plan.stratified && self.task == TaskKind::Regression {
            out.push("stratified splitting needs a classification task".to_string());
        }
        let mut per_fold_seen = false;
        for step in &self.preprocessing {
            let global = step.scope == TransformScope::Global && step.kind.learns_statistics();
            if global && per_fold_seen {
                out.push(format!("global transform {} must come before per-fold transforms", step.kind));
            }
            per_fold_seen |= step.scope == TransformScope::PerFold && step.kind.learns_statistics();
        }
        out
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ValidationError::InvalidExperiment {
                experiment_id: self.experiment_id.clone(),
                message: problems.join("; "),
            })
        }
    }

    /// Leading steps applied once to the whole snapshot, and the rest, which
    /// are fitted on each training fold.
    pub fn split_preprocessing(&self) -> (&[PreprocessingStep], &[PreprocessingStep]) {
        let cut = self
            .preprocessing
            .iter()
            .position(|s| s.scope == TransformScope::PerFold && s.kind.learns_statistics())
            .unwrap_or(self.preprocessing.len());
        self.preprocessing.split_at(cut)
    }

    /// Label for the "Preproc." column: non-scaling steps, or `Raw`.
    pub fn preprocessing_label(&self) -> String {
        let labels: Vec<&str> = self
            .preprocessing
            .iter()
            .filter(|s| !s.kind.is_normalization() && s.kind != TransformKind::Identity)
            .map(|s| s.kind.label())
            .collect();
        if labels.is_empty() {
            "Raw".to_string()
        } else {
            labels.join(", ")
        }
    }

    /// Label for the "Normal." column: scaling steps, or `None`.
    pub fn normalization_label(&self) -> String {
        let labels: Vec<&str> =
            self.preprocessing.iter().filter(|s| s.kind.is_normalization()).map(|s| s.kind.label()).collect();
        if labels.is_empty() {
            "None".to_string()
        } else {
            labels.join(", ")
        }
    }

    pub fn scalar_metric_names(&self) -> Vec<MetricName> {
        self.metric_names.iter().copied().filter(|m| m.is_scalar()).collect()
    }
}

/// Train and test results of one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub experiment_id: String,
    pub fold_index: usize,
    /// Scalar metrics only; undefined values (e.g. R² on a constant target) are NaN.
    #[serde(with = "crate::serde_nan::map")]
    pub train_metrics: BTreeMap<MetricName, f64>,
    #[serde(with = "crate::serde_nan::map")]
    pub test_metrics: BTreeMap<MetricName, f64>,
    pub train_size: usize,
    pub test_indices: Vec<usize>,
    pub test_predictions: Vec<f64>,
    pub test_true: Vec<f64>,
    pub train_confusion: Option<Vec<Vec<u64>>>,
    pub test_confusion: Option<Vec<Vec<u64>>>,
    pub training_trace: Option<TrainingTrace>,
    /// Transforms fitted on this fold's training rows.
    pub fold_transforms: Vec<TransformSpec>,
    pub degenerate_flag: bool,
    pub warnings: Vec<FitWarning>,
}

/// Computes the requested scalar metrics; undefined values become NaN.
pub fn scalar_metrics(
    names: &[MetricName],
    task: TaskKind,
    n_classes: usize,
    y_true: &[f64],
    y_pred: &[f64],
) -> Result<BTreeMap<MetricName, f64>, MetricError> {
    let labels = |v: &[f64]| v.iter().map(|&x| x as usize).collect::<Vec<_>>();
    let mut out = BTreeMap::new();
    for &name in names.iter().filter(|m| m.is_scalar()) {
        let value = match name {
            MetricName::Mae => metrics::mae(y_true, y_pred)?,
            MetricName::Mse => metrics::mse(y_true, y_pred)?,
            MetricName::Rmse => metrics::rmse(y_true, y_pred)?,
            MetricName::R2 => match metrics::r_squared(y_true, y_pred) {
                Ok(v) => v,
                Err(MetricError::ConstantTarget | MetricError::TooFewSamples) => f64::NAN,
                Err(e) => return Err(e),
            },
            MetricName::Accuracy => metrics::accuracy(&labels(y_true), &labels(y_pred))?,
            MetricName::F1 => {
                let averaging = if n_classes <= 2 { F1Averaging::Binary } else { F1Averaging::Macro };
                metrics::f1(&labels(y_true), &labels(y_pred), averaging)?
            }
            MetricName::ConfusionMatrix => unreachable!("filtered above"),
        };
        debug_assert_eq!(task, name.task());
        out.insert(name, value);
    }
    Ok(out)
}

fn looks_like_snapshot_id(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_hexdigit())
}

/// Runs every fold of one experiment. Folds may execute in parallel; the
/// result is ordered by fold index and independent of scheduling.
pub fn run_experiment(spec: &ExperimentSpec, snapshot: &DatasetSnapshot) -> Result<Vec<FoldRecord>, ValidationError> {
    spec.validate()?;
    let invalid = |message: String| ValidationError::InvalidExperiment { experiment_id: spec.experiment_id.clone(), message };
    if snapshot.task_kind() != spec.task {
        return Err(invalid(format!("dataset is a {} dataset, experiment is {}", snapshot.task_kind(), spec.task)));
    }
    if looks_like_snapshot_id(&spec.dataset_ref) && spec.dataset_ref != snapshot.snapshot_id() {
        return Err(invalid(format!(
            "dataset_ref {} does not match snapshot {}",
            spec.dataset_ref,
            snapshot.snapshot_id()
        )));
    }

    let (global_steps, fold_steps) = spec.split_preprocessing();
    let mut data = snapshot.clone();
    for step in global_steps {
        let dataset_err = |source| ValidationError::Dataset { experiment_id: spec.experiment_id.clone(), source };
        let fitted = TransformSpec::fit(step.kind, TransformScope::Global, data.features(), data.feature_names(), None)
            .map_err(dataset_err)?;
        data = apply_transform(&data, &fitted).map_err(dataset_err)?;
    }

    let labels = (spec.task == TaskKind::Classification).then(|| data.class_labels());
    let folds = make_splits(&spec.split_plan, data.n_samples(), labels.as_deref())?;
    let n_classes = data.n_classes();

    let results: Vec<Result<FoldRecord, ValidationError>> =
        folds.par_iter().map(|fold| run_fold(spec, &data, fold_steps, fold, n_classes)).collect();
    results.into_iter().collect()
}

fn run_fold(
    spec: &ExperimentSpec,
    data: &DatasetSnapshot,
    steps: &[PreprocessingStep],
    fold: &FoldAssignment,
    n_classes: usize,
) -> Result<FoldRecord, ValidationError> {
    let id = spec.experiment_id.clone();
    let fold_index = fold.fold_index;
    let dataset_err = |source| ValidationError::FoldDataset { experiment_id: id.clone(), fold_index, source };
    let learner_err = |source| ValidationError::FoldLearner { experiment_id: id.clone(), fold_index, source };
    let metric_err = |source| ValidationError::FoldMetric { experiment_id: id.clone(), fold_index, source };

    let mut x_train = data.features().select_rows(&fold.train_indices);
    let mut x_test = data.features().select_rows(&fold.test_indices);
    let y_train: Vec<f64> = fold.train_indices.iter().map(|&i| data.target()[i]).collect();
    let y_test: Vec<f64> = fold.test_indices.iter().map(|&i| data.target()[i]).collect();

    let mut fold_transforms = Vec::with_capacity(steps.len());
    for step in steps {
        let fitted = TransformSpec::fit(step.kind, step.scope, &x_train, data.feature_names(), None).map_err(dataset_err)?;
        x_train = fitted.apply(&x_train).map_err(dataset_err)?;
        x_test = fitted.apply(&x_test).map_err(dataset_err)?;
        fold_transforms.push(fitted);
    }

    let learner = LearnerSpec { seed: mix(spec.learner.seed, fold_index as u64), ..spec.learner.clone() };
    let model = fit(&learner, &x_train, &y_train).map_err(learner_err)?;
    let train_pred = model.predict(&x_train).map_err(learner_err)?;
    let test_pred = model.predict(&x_test).map_err(learner_err)?;

    let names = &spec.metric_names;
    let train_metrics = scalar_metrics(names, spec.task, n_classes, &y_train, &train_pred).map_err(metric_err)?;
    let test_metrics = scalar_metrics(names, spec.task, n_classes, &y_test, &test_pred).map_err(metric_err)?;

    let (train_confusion, test_confusion) = match spec.task {
        TaskKind::Classification => {
            let cm = |t: &[f64], p: &[f64]| {
                let t: Vec<usize> = t.iter().map(|&v| v as usize).collect();
                let p: Vec<usize> = p.iter().map(|&v| v as usize).collect();
                metrics::confusion_matrix(&t, &p, n_classes)
            };
            (
                Some(cm(&y_train, &train_pred).map_err(metric_err)?),
                Some(cm(&y_test, &test_pred).map_err(metric_err)?),
            )
        }
        TaskKind::Regression => (None, None),
    };

    Ok(FoldRecord {
        experiment_id: id.clone(),
        fold_index,
        degenerate_flag: predictions_degenerate(spec.task, &test_pred, &y_test, DEFAULT_DEGENERACY_TOLERANCE),
        train_metrics,
        test_metrics,
        train_size: fold.train_indices.len(),
        test_indices: fold.test_indices.clone(),
        test_predictions: test_pred,
        test_true: y_test,
        train_confusion,
        test_confusion,
        training_trace: model.training_trace.clone(),
        fold_transforms,
        warnings: model.warnings.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::ModelType;
    use crate::Matrix;

    fn snapshot(xs: &[f64], ys: &[f64], task: TaskKind) -> DatasetSnapshot {
        DatasetSnapshot::new_raw(Matrix::from_vec(xs.len(), 1, xs.to_vec()), ys.to_vec(), vec!["x".into()], "y", task, vec![])
            .unwrap()
    }

    fn spec(model: ModelType, task: TaskKind, metrics: Vec<MetricName>, split: SplitPlan) -> ExperimentSpec {
        ExperimentSpec {
            experiment_id: "E".into(),
            task,
            dataset_ref: "v1".into(),
            preprocessing: vec![],
            learner: LearnerSpec::new(model, task),
            metric_names: metrics,
            split_plan: split,
            notes: String::new(),
        }
    }

    #[test]
    fn constant_regressor_leave_one_out() {
        let snap = snapshot(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0], TaskKind::Regression);
        let records =
            run_experiment(&spec(ModelType::Constant, TaskKind::Regression, vec![MetricName::Mae], SplitPlan::loo()), &snap)
                .unwrap();
        assert_eq!(records.len(), 3);
        // fold 0 trains on [2, 3] -> predicts 2.5
        assert_eq!(records[0].test_metrics[&MetricName::Mae], 1.5);
        assert_eq!(records[1].test_metrics[&MetricName::Mae], 0.0);
        assert_eq!(records[2].test_metrics[&MetricName::Mae], 1.5);
        assert_eq!(records[0].train_metrics[&MetricName::Mae], 0.5);
        assert!(records.iter().enumerate().all(|(i, r)| r.fold_index == i));
    }

    #[test]
    fn linear_model_on_linear_data_is_exact() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let snap = snapshot(&xs, &ys, TaskKind::Regression);
        let records = run_experiment(
            &spec(ModelType::LinearRegression, TaskKind::Regression, vec![MetricName::Mae], SplitPlan::kfold(2, true)),
            &snap,
        )
        .unwrap();
        for r in &records {
            assert!(r.train_metrics[&MetricName::Mae] <= 1e-8);
            assert!(r.test_metrics[&MetricName::Mae] <= 1e-8);
        }
    }

    #[test]
    fn metric_task_mismatch_is_rejected_upfront() {
        let snap = snapshot(&[0.0, 1.0, 2.0, 3.0], &[0.0, 0.0, 1.0, 1.0], TaskKind::Classification);
        let s = spec(ModelType::Constant, TaskKind::Classification, vec![MetricName::Mae], SplitPlan::loo());
        assert!(matches!(run_experiment(&s, &snap), Err(ValidationError::InvalidExperiment { .. })));
    }

    #[test]
    fn fold_failure_names_experiment_and_fold() {
        // every training fold holds a single class
        let snap = snapshot(&[0.0, 1.0, 2.0, 3.0], &[0.0, 0.0, 1.0, 1.0], TaskKind::Classification);
        let s = spec(ModelType::DecisionTree, TaskKind::Classification, vec![MetricName::Accuracy], SplitPlan::kfold(2, false));
        match run_experiment(&s, &snap) {
            Err(ValidationError::FoldLearner { experiment_id, fold_index, .. }) => {
                assert_eq!(experiment_id, "E");
                assert_eq!(fold_index, 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn per_fold_transforms_are_recorded() {
        let xs: Vec<f64> = (1..=8).map(f64::from).collect();
        let snap = snapshot(&xs, &xs, TaskKind::Regression);
        let mut s = spec(ModelType::LinearRegression, TaskKind::Regression, vec![MetricName::Mae], SplitPlan::kfold(2, false));
        s.preprocessing = vec![PreprocessingStep { kind: TransformKind::MaxNormalize, scope: TransformScope::PerFold }];
        let records = run_experiment(&s, &snap).unwrap();
        assert_eq!(records[0].fold_transforms[0].parameters["max_abs"], vec![8.0]);
        assert_eq!(records[1].fold_transforms[0].parameters["max_abs"], vec![4.0]);
    }

    #[test]
    fn labels_and_problems() {
        let mut s = spec(ModelType::Knn, TaskKind::Classification, vec![MetricName::Accuracy, MetricName::F1], SplitPlan::loo());
        assert_eq!(s.preprocessing_label(), "Raw");
        assert_eq!(s.normalization_label(), "None");
        s.preprocessing = vec![
            PreprocessingStep { kind: TransformKind::LinearDetrend, scope: TransformScope::Global },
            PreprocessingStep { kind: TransformKind::MaxNormalize, scope: TransformScope::PerFold },
        ];
        assert_eq!(s.preprocessing_label(), "Baseline removed");
        assert_eq!(s.normalization_label(), "max = 1");
        assert!(s.problems().is_empty());
        s.preprocessing.push(PreprocessingStep { kind: TransformKind::ZScore, scope: TransformScope::Global });
        s.metric_names.push(MetricName::Mae);
        assert_eq!(s.problems().len(), 2);
    }
}
