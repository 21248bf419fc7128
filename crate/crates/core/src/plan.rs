//! The JSON experiment plan.
//!
//! ```json
//! {
//!   "version": 1,
//!   "defaults": { "seed": 7, "alpha": 0.5, "beta": 0.5, "epsilon_ideal": 0.02, "log_base": 10 },
//!   "datasets": { "v1": "snapshots/snapshot-0123456789abcdef.json" },
//!   "data_dir": "snapshots",
//!   "experiments": [
//!     {
//!       "id": "EX1",
//!       "task": "classification",
//!       "dataset": "v1",
//!       "preprocessing": [{ "kind": "max_normalize", "scope": "per_fold" }],
//!       "model": { "type": "decision_tree", "hyperparameters": { "max_depth": 4 } },
//!       "metrics": ["accuracy", "f1"],
//!       "cv": { "method": "kfold", "k": 5 },
//!       "notes": "First quick baseline"
//!     }
//!   ]
//! }
//! ```
//!
//! `dataset` is looked up in `datasets` first, then treated as a manifest
//! path, then as a snapshot id (or id prefix) inside `data_dir`. Relative
//! paths are relative to the plan file.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{load_snapshot, DatasetSnapshot};
use crate::learners::{LearnerSpec, ModelType};
use crate::metrics::{DiagnosticsConfig, MetricName};
use crate::validation::{ExperimentSpec, PreprocessingStep, SplitMethod, SplitPlan};
use crate::TaskKind;

pub const SUPPORTED_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("cannot read plan {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid plan:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("experiment {experiment_id}: dataset `{reference}` {message}")]
    UnresolvedDataset { experiment_id: String, reference: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDefaults {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "half")]
    pub alpha: f64,
    #[serde(default = "half")]
    pub beta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon_ideal: f64,
    #[serde(default = "default_log_base")]
    pub log_base: f64,
}

fn half() -> f64 {
    0.5
}

fn default_epsilon() -> f64 {
    0.02
}

fn default_log_base() -> f64 {
    10.0
}

impl Default for PlanDefaults {
    fn default() -> Self {
        Self { seed: None, alpha: 0.5, beta: 0.5, epsilon_ideal: 0.02, log_base: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    #[serde(rename = "type")]
    pub model_type: ModelType,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Cross-validation block; omitted fields take the [`SplitPlan`] defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvEntry {
    pub method: SplitMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_splits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuffle: Option<bool>,
    #[serde(default)]
    pub stratified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl CvEntry {
    fn to_split_plan(&self, seed: u64) -> SplitPlan {
        let base = match self.method {
            SplitMethod::Loo => SplitPlan::loo(),
            SplitMethod::Kfold => SplitPlan::kfold(5, true),
            SplitMethod::MonteCarlo => SplitPlan::monte_carlo(10, 0.2),
        };
        SplitPlan {
            k: self.k.unwrap_or(base.k),
            n_splits: self.n_splits.unwrap_or(base.n_splits),
            test_fraction: self.test_fraction.unwrap_or(base.test_fraction),
            shuffle: self.shuffle.unwrap_or(base.shuffle),
            stratified: self.stratified,
            seed,
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanExperiment {
    pub id: String,
    pub task: TaskKind,
    pub dataset: String,
    #[serde(default)]
    pub preprocessing: Vec<PreprocessingStep>,
    pub model: ModelEntry,
    pub metrics: Vec<MetricName>,
    pub cv: CvEntry,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub version: u32,
    #[serde(default)]
    pub defaults: PlanDefaults,
    #[serde(default)]
    pub datasets: BTreeMap<String, String>,
    #[serde(default)]
    pub data_dir: Option<String>,
    pub experiments: Vec<PlanExperiment>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Top level with experiments left raw, so each one can be checked on its own.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    version: u32,
    #[serde(default)]
    defaults: PlanDefaults,
    #[serde(default)]
    datasets: BTreeMap<String, String>,
    #[serde(default)]
    data_dir: Option<String>,
    experiments: Vec<serde_json::Value>,
}

impl PlanFile {
    /// Parses and checks a plan, reporting every problem found.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, PlanError> {
        let raw: RawPlan = serde_json::from_str(text).map_err(|e| PlanError::Invalid(vec![format!("plan: {e}")]))?;
        let mut problems = Vec::new();
        if raw.version != SUPPORTED_VERSION {
            problems.push(format!("unsupported plan version {} (expected {SUPPORTED_VERSION})", raw.version));
        }
        let d = &raw.defaults;
        if !(d.alpha > 0.0 && d.beta > 0.0) {
            problems.push(format!("defaults: alpha and beta must be positive (got {}, {})", d.alpha, d.beta));
        }
        if !(d.epsilon_ideal >= 0.0) {
            problems.push(format!("defaults: epsilon_ideal must be non-negative (got {})", d.epsilon_ideal));
        }
        if !(d.log_base > 0.0 && d.log_base != 1.0) {
            problems.push(format!("defaults: log_base must be positive and not 1 (got {})", d.log_base));
        }
        if raw.experiments.is_empty() {
            problems.push("plan has no experiments".to_string());
        }

        let mut experiments = Vec::new();
        let mut seen = HashSet::new();
        for (i, value) in raw.experiments.into_iter().enumerate() {
            let name = value
                .get("id")
                .and_then(|v| v.as_str())
                .map_or_else(|| format!("experiment #{}", i + 1), |id| format!("experiment {id}"));
            if let Some(id) = value.get("id").and_then(|v| v.as_str()) {
                if !seen.insert(id.to_string()) {
                    problems.push(format!("duplicate experiment id `{id}`"));
                }
            }
            match serde_json::from_value::<PlanExperiment>(value) {
                Ok(exp) => {
                    let spec = exp.to_spec(None);
                    problems.extend(spec.problems().into_iter().map(|p| format!("{name}: {p}")));
                    experiments.push(exp);
                }
                Err(e) => problems.push(format!("{name}: {e}")),
            }
        }
        if !problems.is_empty() {
            return Err(PlanError::Invalid(problems));
        }
        Ok(PlanFile {
            version: raw.version,
            defaults: raw.defaults,
            datasets: raw.datasets,
            data_dir: raw.data_dir,
            experiments,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, PlanError> {
        let text = fs::read_to_string(path).map_err(|source| PlanError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    pub fn diagnostics_config(&self) -> DiagnosticsConfig {
        DiagnosticsConfig {
            alpha: self.defaults.alpha,
            beta: self.defaults.beta,
            epsilon_ideal: self.defaults.epsilon_ideal,
            log_base: self.defaults.log_base,
        }
    }

    /// The command-line seed wins over the plan default.
    pub fn effective_seed(&self, cli_seed: Option<u64>) -> Option<u64> {
        cli_seed.or(self.defaults.seed)
    }

    /// Experiment specs with seeds resolved. When a root seed is in effect it
    /// replaces every per-experiment seed, so all experiments on one dataset
    /// see the same splits.
    pub fn experiment_specs(&self, cli_seed: Option<u64>) -> Vec<ExperimentSpec> {
        let root = self.effective_seed(cli_seed);
        self.experiments.iter().map(|e| e.to_spec(root)).collect()
    }

    fn resolve_path(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Manifest path for a dataset reference.
    pub fn resolve_dataset(&self, reference: &str) -> Result<PathBuf, String> {
        let target = self.expand_alias(reference);
        self.resolve_target(target).map_err(|m| if target == reference { m } else { format!("alias `{target}` {m}") })
    }

    /// The alias value for `reference`, or `reference` itself.
    fn expand_alias<'s>(&'s self, reference: &'s str) -> &'s str {
        self.datasets.get(reference).map_or(reference, String::as_str)
    }

    fn resolve_target(&self, reference: &str) -> Result<PathBuf, String> {
        let direct = self.resolve_path(reference);
        if direct.is_file() {
            return Ok(direct);
        }
        let is_hex = reference.len() >= 16 && reference.bytes().all(|b| b.is_ascii_hexdigit());
        if is_hex {
            let dir = self.resolve_path(self.data_dir.as_deref().unwrap_or("."));
            let candidate = dir.join(format!("snapshot-{}.json", &reference[..16]));
            if candidate.is_file() {
                return Ok(candidate);
            }
            return Err(format!("no snapshot manifest {} found", candidate.display()));
        }
        Err("is neither a dataset alias, a manifest path nor a snapshot id".to_string())
    }

    /// Every dataset reference that cannot be resolved.
    pub fn unresolved_datasets(&self) -> Vec<String> {
        self.experiments
            .iter()
            .filter_map(|e| {
                self.resolve_dataset(&e.dataset)
                    .err()
                    .map(|m| format!("experiment {}: dataset `{}` {m}", e.id, e.dataset))
            })
            .collect()
    }

    /// Loads the snapshot of every experiment, sharing loads between experiments.
    pub fn load_snapshots(&self) -> Result<Vec<DatasetSnapshot>, PlanError> {
        let mut cache: BTreeMap<PathBuf, DatasetSnapshot> = BTreeMap::new();
        let mut out = Vec::with_capacity(self.experiments.len());
        for e in &self.experiments {
            let unresolved = |message: String| PlanError::UnresolvedDataset {
                experiment_id: e.id.clone(),
                reference: e.dataset.clone(),
                message,
            };
            let path = self.resolve_dataset(&e.dataset).map_err(unresolved)?;
            if !cache.contains_key(&path) {
                let snap = load_snapshot(&path).map_err(|err| unresolved(format!("failed to load: {err}")))?;
                cache.insert(path.clone(), snap);
            }
            let snap = &cache[&path];
            let target = self.expand_alias(&e.dataset);
            let is_full_id = target.len() == 64 && target.bytes().all(|b| b.is_ascii_hexdigit());
            if is_full_id && snap.snapshot_id() != target {
                return Err(unresolved(format!("resolved to snapshot {}", snap.snapshot_id())));
            }
            out.push(snap.clone());
        }
        Ok(out)
    }
}

impl PlanExperiment {
    pub fn to_spec(&self, root_seed: Option<u64>) -> ExperimentSpec {
        let split_seed = root_seed.or(self.cv.seed).unwrap_or(0);
        let learner_seed = root_seed.or(self.model.seed).unwrap_or(0);
        ExperimentSpec {
            experiment_id: self.id.clone(),
            task: self.task,
            dataset_ref: self.dataset.clone(),
            preprocessing: self.preprocessing.clone(),
            learner: LearnerSpec {
                model_type: self.model.model_type,
                task_kind: self.task,
                hyperparameters: self.model.hyperparameters.clone(),
                seed: learner_seed,
            },
            metric_names: self.metrics.clone(),
            split_plan: self.cv.to_split_plan(split_seed),
            notes: self.notes.clone(),
        }
    }
}
