//! Versioned dataset snapshots.
//!
//! A [`DatasetSnapshot`] is never mutated: transforms produce a new snapshot
//! whose `parent_id` points at its input and whose lineage grows by one entry.
//! The snapshot id is a SHA-256 over a canonical byte encoding of the content,
//! so two snapshots with the same id hold the same data.

mod store;
mod transform;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::{Matrix, TaskKind};

pub use store::{load_snapshot, read_manifest, save_snapshot, SnapshotManifest};
pub use transform::{detrend_row, TransformKind, TransformScope, TransformSpec};

/// Parent id of snapshots loaded straight from raw data.
pub const RAW_PARENT: &str = "raw";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("malformed CSV at row {row}, column {column}: {message}")]
    MalformedCsv { row: usize, column: usize, message: String },
    #[error("non-numeric value {value:?} in column `{column}` at row {row}")]
    NonNumericFeature { row: usize, column: String, value: String },
    #[error("non-finite value in column `{column}` at row {row}")]
    NonFiniteValue { row: usize, column: String },
    #[error("dataset has no data rows")]
    EmptyDataset,
    #[error("target column `{0}` not found in header")]
    UnknownTargetColumn(String),
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("feature rows ({rows}) and target length ({target}) differ")]
    ShapeMismatch { rows: usize, target: usize },
    #[error("feature names ({names}) do not match feature count ({features})")]
    FeatureNameMismatch { names: usize, features: usize },
    #[error("classification label {0} is not a non-negative integer")]
    InvalidLabel(f64),
    #[error("feature {feature} has a degenerate statistic for {kind}: {reason}")]
    DegenerateStatistic { kind: TransformKind, feature: String, reason: String },
    #[error("invalid row subset: {0}")]
    InvalidRowSubset(String),
    #[error("transform dimension mismatch: expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("transform {0} has not been fitted")]
    UnfittedTransform(TransformKind),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {path}: {message}")]
    InvalidManifest { path: PathBuf, message: String },
    #[error("snapshot hash mismatch: manifest says {expected}, content hashes to {actual}")]
    HashMismatch { expected: String, actual: String },
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.into(), source }
    }
}

/// Immutable, content-hashed table of features plus target.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSnapshot {
    snapshot_id: String,
    features: Matrix,
    target: Vec<f64>,
    feature_names: Vec<String>,
    target_name: String,
    task_kind: TaskKind,
    class_names: Vec<String>,
    lineage: Vec<TransformSpec>,
    parent_id: String,
}

impl DatasetSnapshot {
    /// Builds a raw snapshot (empty lineage, parent `"raw"`).
    ///
    /// `class_names` is the label map for classification targets that were
    /// read as strings; leave it empty when labels are already integers.
    pub fn new_raw(
        features: Matrix,
        target: Vec<f64>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        task_kind: TaskKind,
        class_names: Vec<String>,
    ) -> Result<Self, DatasetError> {
        Self::build(
            features,
            target,
            feature_names,
            target_name.into(),
            task_kind,
            class_names,
            Vec::new(),
            RAW_PARENT.to_string(),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn build(
        features: Matrix,
        target: Vec<f64>,
        feature_names: Vec<String>,
        target_name: String,
        task_kind: TaskKind,
        class_names: Vec<String>,
        lineage: Vec<TransformSpec>,
        parent_id: String,
    ) -> Result<Self, DatasetError> {
        if features.nrows() != target.len() {
            return Err(DatasetError::ShapeMismatch { rows: features.nrows(), target: target.len() });
        }
        if target.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        if features.ncols() == 0 {
            return Err(DatasetError::NoFeatures);
        }
        if feature_names.len() != features.ncols() {
            return Err(DatasetError::FeatureNameMismatch {
                names: feature_names.len(),
                features: features.ncols(),
            });
        }
        for (i, row) in features.rows_iter().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonFiniteValue { row: i + 1, column: feature_names[j].clone() });
            }
        }
        if let Some(i) = target.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFiniteValue { row: i + 1, column: target_name });
        }
        if task_kind == TaskKind::Classification {
            if let Some(&bad) = target.iter().find(|v| **v < 0.0 || v.fract() != 0.0) {
                return Err(DatasetError::InvalidLabel(bad));
            }
        }
        let mut snapshot = Self {
            snapshot_id: String::new(),
            features,
            target,
            feature_names,
            target_name,
            task_kind,
            class_names,
            lineage,
            parent_id,
        };
        snapshot.snapshot_id = snapshot.content_hash();
        Ok(snapshot)
    }

    pub fn snapshot_id(&self) -> &str {
        &self.snapshot_id
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn task_kind(&self) -> TaskKind {
        self.task_kind
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn lineage(&self) -> &[TransformSpec] {
        &self.lineage
    }

    pub fn parent_id(&self) -> &str {
        &self.parent_id
    }

    pub fn n_samples(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Classification labels as indices. Meaningless for regression snapshots.
    pub fn class_labels(&self) -> Vec<usize> {
        self.target.iter().map(|&v| v as usize).collect()
    }

    /// Number of classes, taken as the largest label plus one.
    pub fn n_classes(&self) -> usize {
        match self.task_kind {
            TaskKind::Regression => 0,
            TaskKind::Classification => self.class_labels().into_iter().max().map_or(0, |m| m + 1).max(self.class_names.len()),
        }
    }

    /// Recomputes the SHA-256 content hash.
    pub fn content_hash(&self) -> String {
        #[derive(Serialize)]
        struct Meta<'a> {
            feature_names: &'a [String],
            target_name: &'a str,
            task_kind: TaskKind,
            class_names: &'a [String],
            lineage: &'a [TransformSpec],
        }

        let mut hasher = Sha256::new();
        hasher.update(b"mlbaseline-snapshot-v1\0");
        hasher.update((self.features.nrows() as u64).to_le_bytes());
        hasher.update((self.features.ncols() as u64).to_le_bytes());
        for v in self.features.as_slice() {
            hasher.update(v.to_bits().to_le_bytes());
        }
        for v in &self.target {
            hasher.update(v.to_bits().to_le_bytes());
        }
        let meta = Meta {
            feature_names: &self.feature_names,
            target_name: &self.target_name,
            task_kind: self.task_kind,
            class_names: &self.class_names,
            lineage: &self.lineage,
        };
        hasher.update(serde_json::to_vec(&meta).expect("metadata serializes"));
        hex::encode(hasher.finalize())
    }

    /// Returns a copy of this snapshot with one feature value replaced.
    /// The copy is a new raw-equivalent snapshot sharing lineage and parent.
    pub fn with_feature_value(&self, row: usize, col: usize, value: f64) -> Result<Self, DatasetError> {
        let mut features = self.features.clone();
        features.set(row, col, value);
        Self::build(
            features,
            self.target.clone(),
            self.feature_names.clone(),
            self.target_name.clone(),
            self.task_kind,
            self.class_names.clone(),
            self.lineage.clone(),
            self.parent_id.clone(),
        )
    }
}

/// Reads a CSV file with a header row into a raw snapshot.
///
/// Every column other than `target_column` is a feature and must parse as a
/// finite real. Classification targets are read as non-negative integers; if
/// any cell is not one, all target cells are mapped to integers by order of
/// first appearance and the mapping is kept in `class_names`.
pub fn load_csv(path: &Path, target_column: &str, task_kind: TaskKind) -> Result<DatasetSnapshot, DatasetError> {
    if !path.is_file() {
        return Err(DatasetError::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(e, path))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(e, path))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| DatasetError::UnknownTargetColumn(target_column.to_string()))?;
    let feature_names: Vec<String> =
        header.iter().enumerate().filter(|(i, _)| *i != target_idx).map(|(_, h)| h.clone()).collect();

    let mut data = Vec::new();
    let mut raw_target = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| csv_error(e, path))?;
        if record.len() != header.len() {
            return Err(DatasetError::MalformedCsv {
                row,
                column: record.len().min(header.len()) + 1,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if c == target_idx {
                raw_target.push(cell.to_string());
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| DatasetError::NonNumericFeature {
                row,
                column: header[c].clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::NonFiniteValue { row, column: header[c].clone() });
            }
            data.push(value);
        }
    }
    if raw_target.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    if feature_names.is_empty() {
        return Err(DatasetError::NoFeatures);
    }

    let (target, class_names) = match task_kind {
        TaskKind::Regression => {
            let mut target = Vec::with_capacity(raw_target.len());
            for (r, cell) in raw_target.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| DatasetError::NonNumericFeature {
                    row: r + 1,
                    column: target_column.to_string(),
                    value: cell.clone(),
                })?;
                target.push(v);
            }
            (target, Vec::new())
        }
        TaskKind::Classification => parse_labels(&raw_target),
    };

    let features = Matrix::from_vec(raw_target.len(), feature_names.len(), data);
    DatasetSnapshot::new_raw(features, target, feature_names, target_column, task_kind, class_names)
}

fn parse_labels(cells: &[String]) -> (Vec<f64>, Vec<String>) {
    let as_ints: Option<Vec<f64>> = cells.iter().map(|c| c.parse::<u32>().ok().map(f64::from)).collect();
    if let Some(labels) = as_ints {
        return (labels, Vec::new());
    }
    let mut mapping: HashMap<&str, usize> = HashMap::new();
    let mut names = Vec::new();
    let labels = cells
        .iter()
        .map(|c| {
            let next = names.len();
            let idx = *mapping.entry(c.as_str()).or_insert_with(|| {
                names.push(c.clone());
                next
            });
            idx as f64
        })
        .collect();
    (labels, names)
}

fn csv_error(err: csv::Error, path: &Path) -> DatasetError {
    let (row, column) = err
        .position()
        .map_or((0, 0), |p| (p.record() as usize, 0));
    match err.into_kind() {
        csv::ErrorKind::Io(e) => DatasetError::io(path, e),
        kind => DatasetError::MalformedCsv { row, column, message: format!("{kind:?}") },
    }
}

/// Fits a transform on `snapshot`, optionally restricted to `row_subset`.
pub fn fit_transform(
    snapshot: &DatasetSnapshot,
    kind: TransformKind,
    scope: TransformScope,
    row_subset: Option<&[usize]>,
) -> Result<TransformSpec, DatasetError> {
    TransformSpec::fit(kind, scope, snapshot.features(), snapshot.feature_names(), row_subset)
}

/// Applies a fitted transform, returning a derived snapshot. The input is untouched.
pub fn apply_transform(snapshot: &DatasetSnapshot, spec: &TransformSpec) -> Result<DatasetSnapshot, DatasetError> {
    let features = spec.apply(snapshot.features())?;
    let mut lineage = snapshot.lineage.clone();
    lineage.push(spec.clone());
    DatasetSnapshot::build(
        features,
        snapshot.target.clone(),
        snapshot.feature_names.clone(),
        snapshot.target_name.clone(),
        snapshot.task_kind,
        snapshot.class_names.clone(),
        lineage,
        snapshot.snapshot_id.clone(),
    )
}
