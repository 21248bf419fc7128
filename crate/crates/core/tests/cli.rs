use std::fs;
use std::path::{Path, PathBuf};

use mlbaseline::cli::run_cli;
use mlbaseline::plan::PlanFile;
use mlbaseline::reporting::{render_plan_table, TableFormat};
use serde_json::json;

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mlbaseline").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three classes, two features, deterministic values.
fn write_csv(dir: &Path) -> PathBuf {
    let mut text = String::from("a,b,label\n");
    for i in 0..30 {
        let class = ["x", "y", "z"][i % 3];
        text.push_str(&format!("{},{},{class}\n", (i % 3) as f64 * 2.0 + (i as f64) * 0.01, (i * 7 % 5) as f64));
    }
    let path = dir.join("data.csv");
    fs::write(&path, text).unwrap();
    path
}

fn snapshot(dir: &Path) -> String {
    let csv = write_csv(dir);
    let (code, out, err) = cli(&["data", "snapshot", "--input", s(&csv), "--target", "label", "--task", "classification", "--out", s(&dir.join("snaps"))]);
    assert_eq!(code, 0, "{err}");
    out.lines().next().unwrap().to_string()
}

fn plan(dir: &Path, experiments: serde_json::Value) -> PathBuf {
    let path = dir.join("plan.json");
    let body = json!({ "version": 1, "data_dir": "snaps", "experiments": experiments });
    fs::write(&path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    path
}

fn tree_experiment(id: &str, dataset: &str) -> serde_json::Value {
    json!({
        "id": id, "task": "classification", "dataset": dataset,
        "model": { "type": "decision_tree", "hyperparameters": { "max_depth": 2 } },
        "metrics": ["accuracy", "f1"],
        "cv": { "method": "kfold", "k": 3, "seed": 5 }
    })
}

#[test]
fn plan_validate_accepts_a_good_plan() {
    let dir = tempfile::tempdir().unwrap();
    let id = snapshot(dir.path());
    let p = plan(dir.path(), json!([tree_experiment("EX1", &id), tree_experiment("EX2", &id[..16])]));
    let (code, out, _) = cli(&["plan", "validate", "--plan", s(&p)]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "2 experiments, OK");
}

#[test]
fn plan_validate_reports_duplicates_and_metric_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let id = snapshot(dir.path());
    let mut bad = tree_experiment("EX1", &id);
    bad["metrics"] = json!(["mae"]);
    let p = plan(dir.path(), json!([tree_experiment("EX1", &id), bad]));
    let (code, _, err) = cli(&["plan", "validate", "--plan", s(&p)]);
    assert_eq!(code, 1);
    assert!(err.contains("duplicate experiment id `EX1`"), "{err}");
    assert!(err.contains("`mae`"), "{err}");
}

#[test]
fn missing_plan_file_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = cli(&["plan", "validate", "--plan", s(&dir.path().join("absent.json"))]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn run_with_unresolvable_snapshot_fails() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan(dir.path(), json!([tree_experiment("EX1", &"ab".repeat(32))]));
    let (code, _, err) = cli(&["run", "--plan", s(&p), "--out", s(&dir.path().join("out"))]);
    assert_eq!(code, 1);
    assert!(err.contains("EX1"), "{err}");
}

#[test]
fn report_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = cli(&["report", "--out", s(dir.path())]);
    assert_eq!(code, 1);
    assert!(err.contains("results"), "{err}");
}

#[test]
fn snapshot_rejects_per_fold_scope() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path());
    let (code, _, err) = cli(&[
        "data", "snapshot", "--input", s(&csv), "--target", "label", "--task", "classification",
        "--transform", "max_normalize", "--scope", "per-fold", "--out", s(&dir.path().join("snaps")),
    ]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn snapshot_is_deterministic_and_records_lineage() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path());
    let run = || {
        cli(&[
            "data", "snapshot", "--input", s(&csv), "--target", "label", "--task", "classification",
            "--transform", "linear_detrend", "--transform", "max_normalize", "--out", s(&dir.path().join("snaps")),
        ])
    };
    let (code, first, err) = run();
    assert_eq!(code, 0, "{err}");
    assert_eq!(run().1, first);
    let manifest = first.lines().nth(1).unwrap().trim_start_matches("manifest: ");
    let loaded = mlbaseline::dataset::load_snapshot(Path::new(manifest)).unwrap();
    assert_eq!(loaded.lineage().len(), 2);
    assert_eq!(loaded.snapshot_id(), first.lines().next().unwrap());
}

#[test]
fn run_and_report_produce_fold_rows_and_status_classes() {
    let dir = tempfile::tempdir().unwrap();
    let id = snapshot(dir.path());
    let mut constant = tree_experiment("CONST", &id);
    constant["model"] = json!({ "type": "constant" });
    let mut mc = tree_experiment("MC", &id);
    mc["cv"] = json!({ "method": "monte_carlo", "n_splits": 3, "test_fraction": 0.3 });
    mc["metrics"] = json!(["accuracy"]);
    let p = plan(dir.path(), json!([tree_experiment("TREE", &id), constant, mc]));
    let out = dir.path().join("out");
    let (code, stdout, err) = cli(&["run", "--plan", s(&p), "--out", s(&out), "--jobs", "2"]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("CONST: ok") && stdout.contains("degenerate (single_class_prediction)"), "{stdout}");

    // 3 folds x 2 partitions x 2 metrics for TREE and CONST; 3 x 2 x 1 for MC
    let folds = fs::read_to_string(out.join("folds.csv")).unwrap();
    let count = |exp: &str| folds.lines().filter(|l| l.starts_with(&format!("{exp},"))).count();
    assert_eq!((count("TREE"), count("CONST"), count("MC")), (12, 12, 6));
    assert!(folds.starts_with("exp_id,fold_index,partition,metric,value\n"));

    let (code, listed, err) = cli(&["report", "--out", s(&out), "--format", "all"]);
    assert_eq!(code, 0, "{err}");
    for name in ["report.md", "results.csv", "results.html", "plan.csv", "plan.html"] {
        assert!(listed.contains(name), "{listed}");
    }
    let html = fs::read_to_string(out.join("report/results.html")).unwrap();
    assert!(html.contains("<tr class=\"degenerate\"><td>CONST</td>"), "{html}");
    let md = fs::read_to_string(out.join("report/report.md")).unwrap();
    for exp in ["TREE", "CONST", "MC"] {
        assert!(md.contains(&format!("| {exp} |")) || md.contains(&format!("**{exp}**")), "{exp} missing");
    }
    // the depth-2 tree separates the classes, so its error rate is 0 on every fold
    assert!(md.contains("- TREE: LOR undefined (zero_test_mean)"), "{md}");
    assert!(out.join("report/plots/CONST_confusion.md").is_file());
}

#[test]
fn plan_table_shows_experiment_definitions() {
    let dir = tempfile::tempdir().unwrap();
    let text = json!({
        "version": 1,
        "experiments": [
            { "id": "EX1", "task": "classification", "dataset": "v1",
              "preprocessing": [{ "kind": "max_normalize", "scope": "global" }],
              "model": { "type": "decision_tree" }, "metrics": ["accuracy", "f1"],
              "cv": { "method": "kfold", "k": 5 }, "notes": "Check depth" },
            { "id": "EX2", "task": "classification", "dataset": "v2",
              "preprocessing": [{ "kind": "linear_detrend", "scope": "global" }],
              "model": { "type": "random_forest" }, "metrics": ["accuracy", "f1"],
              "cv": { "method": "kfold", "k": 5 }, "notes": "Compare baseline" }
        ]
    });
    let plan = PlanFile::from_json(&text.to_string(), dir.path()).unwrap();
    let md = render_plan_table(&plan.experiment_specs(None), TableFormat::Markdown).unwrap();
    let lines: Vec<&str> = md.lines().collect();
    assert_eq!(lines[0], "| Exp. ID | Task | Preproc. | Normal. | Instance | Metrics | Dataset | Notes |");
    assert_eq!(lines[2], "| EX1 | Classification | Raw | max = 1 | Decision Tree | Accuracy, F1 | v1 | Check depth |");
    assert_eq!(lines[3], "| EX2 | Classification | Baseline removed | None | Random Forest | Accuracy, F1 | v2 | Compare baseline |");
}
