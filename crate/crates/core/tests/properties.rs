//! Property tests over the public API.

use std::collections::BTreeSet;

use mlbaseline::dataset::{apply_transform, fit_transform, load_snapshot, save_snapshot, DatasetSnapshot, TransformKind, TransformScope};
use mlbaseline::learners::{fit, LearnerSpec, ModelType};
use mlbaseline::metrics::{aggregate, confusion_matrix, cos, DiagnosticsConfig, MetricName};
use mlbaseline::reporting::{persist_results, report_rows, RunMetadata, STD_CONVENTION};
use mlbaseline::runner::run_all;
use mlbaseline::selection::{detect_degenerate, select_best, Candidate, Color, DegenerateKind, RowStatus, DEFAULT_DEGENERACY_TOLERANCE};
use mlbaseline::validation::{make_splits, run_experiment, ExperimentSpec, SplitPlan};
use mlbaseline::{Matrix, TaskKind};
use proptest::prelude::*;

fn regression_snapshot(values: &[f64], n: usize, p: usize) -> DatasetSnapshot {
    let x = Matrix::from_vec(n, p, values[..n * p].to_vec());
    let y = values[n * p..n * p + n].to_vec();
    DatasetSnapshot::new_raw(x, y, (0..p).map(|j| format!("f{j}")).collect(), "y", TaskKind::Regression, vec![]).unwrap()
}

fn spec(id: &str, model: ModelType, metrics: Vec<MetricName>, split: SplitPlan) -> ExperimentSpec {
    ExperimentSpec {
        experiment_id: id.into(),
        task: TaskKind::Regression,
        dataset_ref: "data".into(),
        preprocessing: vec![],
        learner: LearnerSpec::new(model, TaskKind::Regression),
        metric_names: metrics,
        split_plan: split,
        notes: String::new(),
    }
}

fn candidate(id: usize, lor: f64, cos: f64, kind: Option<DegenerateKind>) -> Candidate {
    Candidate {
        experiment_id: format!("E{id}"),
        lor: Some(lor),
        cos: Some(cos),
        test_metric_mean: 1.0 + id as f64,
        status: RowStatus::new(TaskKind::Regression, Some(0.9), kind),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kfold_partitions_indices(n in 2usize..60, k_seed in 0usize..1000, shuffle: bool, seed: u64) {
        let k = 2 + k_seed % (n - 1);
        let folds = make_splits(&SplitPlan::kfold(k, shuffle).with_seed(seed), n, None).unwrap();
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test_indices.iter().copied()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        for f in &folds {
            prop_assert!(!f.train_indices.is_empty() && !f.test_indices.is_empty());
            let test: BTreeSet<_> = f.test_indices.iter().collect();
            prop_assert!(f.train_indices.iter().all(|i| !test.contains(i) && *i < n));
        }
    }

    #[test]
    fn monte_carlo_splits_are_disjoint_and_complete(n in 2usize..80, splits in 1usize..6, fraction in 0.01f64..0.99, seed: u64) {
        let plan = SplitPlan::monte_carlo(splits, fraction).with_seed(seed);
        match make_splits(&plan, n, None) {
            Ok(folds) => {
                prop_assert_eq!(folds.len(), splits);
                for f in &folds {
                    let mut both: Vec<usize> = f.train_indices.iter().chain(&f.test_indices).copied().collect();
                    both.sort_unstable();
                    prop_assert_eq!(both, (0..n).collect::<Vec<_>>());
                    prop_assert!(!f.train_indices.is_empty() && !f.test_indices.is_empty());
                }
            }
            // rejected only when the ceiling leaves no training rows
            Err(_) => prop_assert!((fraction * n as f64).ceil() as usize >= n),
        }
    }

    #[test]
    fn stratified_kfold_keeps_class_balance(counts in proptest::collection::vec(5usize..20, 2..4), seed: u64) {
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &m)| std::iter::repeat_n(c, m)).collect();
        let k = 5;
        let folds = make_splits(&SplitPlan::kfold(k, true).with_seed(seed).stratified(), labels.len(), Some(&labels)).unwrap();
        let mut seen = vec![0usize; labels.len()];
        for f in &folds {
            for &i in &f.test_indices {
                seen[i] += 1;
            }
            for (c, &m) in counts.iter().enumerate() {
                let in_fold = f.test_indices.iter().filter(|&&i| labels[i] == c).count();
                prop_assert!(in_fold == m / k || in_fold == m.div_ceil(k), "class {c}: {in_fold} of {m}");
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn aggregate_matches_pooled_mean_for_equal_folds(
        errors in proptest::collection::vec(0.0f64..10.0, 24),
        k in prop::sample::select(vec![2usize, 3, 4, 6, 8]),
    ) {
        let size = errors.len() / k;
        let fold_means: Vec<f64> = errors.chunks(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
        let summary = aggregate(&fold_means, &fold_means, "mae").unwrap();
        let pooled = errors.iter().sum::<f64>() / errors.len() as f64;
        prop_assert!((summary.test_mean - pooled).abs() <= 1e-12 * pooled.max(1.0));
        let mean = summary.train_mean;
        let var = fold_means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        prop_assert!((summary.train_std - var.sqrt()).abs() <= 1e-12 * var.sqrt().max(1.0));
        prop_assert_eq!(summary.per_fold_test.len(), summary.n_folds);
    }

    #[test]
    fn cos_fixed_point_is_weight_sum(m in 1e-3f64..1e3, s in 1e-3f64..1e3, a in 0.01f64..3.0, b in 0.01f64..3.0) {
        let v = cos(m, m, s, s, a, b).unwrap();
        prop_assert!((v - (a + b)).abs() <= 1e-12 * (a + b));
    }

    #[test]
    fn confusion_rows_count_true_classes(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..60)) {
        let (truth, pred): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let cm = confusion_matrix(&truth, &pred, 4).unwrap();
        for (class, row) in cm.iter().enumerate() {
            prop_assert_eq!(row.iter().sum::<u64>() as usize, truth.iter().filter(|&&t| t == class).count());
        }
    }

    #[test]
    fn transforms_leave_source_untouched(values in proptest::collection::vec(0.5f64..10.0, 40)) {
        let snap = regression_snapshot(&values, 8, 3);
        let before = (snap.snapshot_id().to_string(), snap.content_hash(), snap.features().clone());
        let mut current = snap.clone();
        for (depth, kind) in [TransformKind::MaxNormalize, TransformKind::LinearDetrend].into_iter().enumerate() {
            let t = fit_transform(&current, kind, TransformScope::Global, None).unwrap();
            current = apply_transform(&current, &t).unwrap();
            prop_assert_eq!(current.lineage().len(), depth + 1);
        }
        prop_assert_eq!(&before, &(snap.snapshot_id().to_string(), snap.content_hash(), snap.features().clone()));
        prop_assert_ne!(current.snapshot_id(), snap.snapshot_id());
    }

    #[test]
    fn snapshot_store_round_trips(values in proptest::collection::vec(-1e6f64..1e6, 30)) {
        let snap = regression_snapshot(&values, 6, 4);
        let t = fit_transform(&snap, TransformKind::ZScore, TransformScope::Global, None);
        prop_assume!(t.is_ok());
        let derived = apply_transform(&snap, &t.unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for s in [&snap, &derived] {
            let path = save_snapshot(s, dir.path()).unwrap();
            prop_assert_eq!(&load_snapshot(&path).unwrap(), s);
        }
    }

    #[test]
    fn early_stopping_restores_best_validation_loss(seed in 0u64..1000, epochs in 5usize..60) {
        let n = 40;
        let x = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64 / n as f64).collect());
        let y: Vec<f64> = (0..n).map(|i| ((i * 7919 + seed as usize) % 13) as f64).collect();
        let spec = LearnerSpec::new(ModelType::Mlp, TaskKind::Regression)
            .with("hidden_units", 4.0)
            .with("max_epochs", epochs as f64)
            .with("patience", 3.0)
            .with_seed(seed);
        let model = fit(&spec, &x, &y).unwrap();
        let trace = model.training_trace.unwrap();
        prop_assert!(trace.stopped_epoch <= epochs);
        prop_assert_eq!(trace.stopped_epoch, trace.train_loss.len());
        prop_assert_eq!(trace.train_loss.len(), trace.validation_loss.len());
        if trace.best_epoch > 0 {
            let min = trace.validation_loss.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(trace.validation_loss[trace.best_epoch - 1], min);
        }
    }

    #[test]
    fn excluded_whenever_degenerate_or_red(r2 in prop::option::of(-2.0f64..1.0), degenerate: bool) {
        let kind = degenerate.then_some(DegenerateKind::ConstantRegression);
        let status = RowStatus::new(TaskKind::Regression, r2, kind);
        if degenerate || status.color == Color::Red {
            prop_assert!(status.excluded_from_selection);
        }
    }

    #[test]
    fn bests_are_eligible_and_exclusion_is_monotone(
        rows in proptest::collection::vec((-1.0f64..1.0, 0.2f64..2.0, any::<bool>()), 1..8),
        extra in 0usize..8,
    ) {
        let candidates: Vec<Candidate> = rows
            .iter()
            .enumerate()
            .map(|(i, &(l, c, bad))| candidate(i, l, c, bad.then_some(DegenerateKind::ConstantRegression)))
            .collect();
        let before = select_best(&candidates);
        for best in [&before.best_lor_experiment_id, &before.best_cos_experiment_id].into_iter().flatten() {
            prop_assert!(before.eligible_ids.contains(best));
        }
        let mut marked = candidates.clone();
        let target = extra % marked.len();
        marked[target].status = RowStatus::new(TaskKind::Regression, Some(0.9), Some(DegenerateKind::ConstantRegression));
        let after = select_best(&marked);
        let removed = &marked[target].experiment_id;
        for (old, new) in [
            (&before.best_lor_experiment_id, &after.best_lor_experiment_id),
            (&before.best_cos_experiment_id, &after.best_cos_experiment_id),
        ] {
            if old.as_ref() != Some(removed) {
                prop_assert_eq!(old, new);
            }
        }
    }

    #[test]
    fn best_lor_ignores_common_metric_scale(
        pairs in proptest::collection::vec((0.1f64..10.0, 0.1f64..10.0), 1..6),
        c in 0.01f64..100.0,
    ) {
        let build = |scale: f64| -> Vec<Candidate> {
            pairs
                .iter()
                .enumerate()
                .map(|(i, &(train, test))| {
                    let mut cand = candidate(i, mlbaseline::metrics::lor(scale * train, scale * test).unwrap(), 1.0, None);
                    cand.test_metric_mean = scale * test;
                    cand
                })
                .collect()
        };
        let plain = select_best(&build(1.0));
        let scaled = select_best(&build(c));
        // equal |LOR| values can flip under rounding; require a clear winner
        let lors: Vec<f64> = pairs.iter().map(|&(a, b)| mlbaseline::metrics::lor(a, b).unwrap().abs()).collect();
        let mut sorted = lors.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.len() < 2 || sorted[1] - sorted[0] > 1e-9);
        prop_assert_eq!(plain.best_lor_experiment_id, scaled.best_lor_experiment_id);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn degeneracy_ignores_fold_order(values in proptest::collection::vec(-5.0f64..5.0, 60), rotate in 0usize..5, constant: bool) {
        let snap = regression_snapshot(&values, 20, 2);
        let model = if constant { ModelType::Constant } else { ModelType::LinearRegression };
        let s = spec("D", model, vec![MetricName::Mae], SplitPlan::kfold(5, true).with_seed(2));
        let mut folds = run_experiment(&s, &snap).unwrap();
        let forward = detect_degenerate(&folds, TaskKind::Regression, DEFAULT_DEGENERACY_TOLERANCE);
        folds.rotate_left(rotate);
        folds.reverse();
        prop_assert_eq!(forward, detect_degenerate(&folds, TaskKind::Regression, DEFAULT_DEGENERACY_TOLERANCE));
    }

    #[test]
    fn fold_metrics_hold_exactly_the_requested_names(values in proptest::collection::vec(-5.0f64..5.0, 60)) {
        let snap = regression_snapshot(&values, 20, 2);
        let metrics = vec![MetricName::Rmse, MetricName::Mae];
        let folds = run_experiment(&spec("M", ModelType::Knn, metrics.clone(), SplitPlan::kfold(4, false)), &snap).unwrap();
        let want: BTreeSet<MetricName> = metrics.into_iter().collect();
        for f in &folds {
            prop_assert_eq!(&f.train_metrics.keys().copied().collect::<BTreeSet<_>>(), &want);
            prop_assert_eq!(&f.test_metrics.keys().copied().collect::<BTreeSet<_>>(), &want);
        }
    }

    #[test]
    fn summary_csv_is_lossless(values in proptest::collection::vec(-5.0f64..5.0, 90), k in 2usize..6) {
        let snap = regression_snapshot(&values, 30, 2);
        let experiments = vec![
            (spec("A", ModelType::LinearRegression, vec![MetricName::Mae, MetricName::R2], SplitPlan::kfold(k, true)), snap.clone()),
            (spec("B", ModelType::Knn, vec![MetricName::Mae, MetricName::R2], SplitPlan::kfold(k, true)), snap),
        ];
        let outcome = run_all(1, &experiments, &DiagnosticsConfig::default());
        let specs: Vec<ExperimentSpec> = experiments.iter().map(|(s, _)| s.clone()).collect();
        let metadata = RunMetadata {
            root_seed: None,
            log_base: 10.0,
            alpha: 0.5,
            beta: 0.5,
            epsilon_ideal: 0.02,
            std_convention: STD_CONVENTION.into(),
            tool_version: "test".into(),
            snapshot_ids: vec![],
            started_at: String::new(),
            finished_at: String::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        let paths = persist_results(&outcome, &specs, &metadata, dir.path()).unwrap();
        let mut reader = csv::Reader::from_path(&paths.summary).unwrap();
        let header = reader.headers().unwrap().clone();
        let col = |name: &str| header.iter().position(|h| h == name).unwrap();
        let parse = |cell: &str| -> Option<f64> { (!cell.is_empty()).then(|| cell.parse().unwrap()) };
        let rows = report_rows(&outcome);
        let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
        prop_assert_eq!(records.len(), rows.len());
        for (record, row) in records.iter().zip(&rows) {
            prop_assert_eq!(&record[col("exp_id")], row.experiment_id.as_str());
            let mae = row.metric("mae").unwrap();
            prop_assert_eq!(parse(&record[col("mae_train_mean")]), Some(mae.train_mean));
            prop_assert_eq!(parse(&record[col("mae_train_std")]), Some(mae.train_std));
            prop_assert_eq!(parse(&record[col("mae_test_mean")]), Some(mae.test_mean));
            prop_assert_eq!(parse(&record[col("mae_test_std")]), Some(mae.test_std));
            prop_assert_eq!(parse(&record[col("lor")]), row.lor);
            prop_assert_eq!(parse(&record[col("cos")]), row.cos);
            prop_assert_eq!(parse(&record[col("r2_test_mean")]), row.r2_test_mean);
        }
    }
}
