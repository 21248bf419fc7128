//! On-disk snapshot format: a CSV data file plus a JSON manifest.
//!
//! Numbers are written with Rust's shortest round-trip formatting so a
//! reload reproduces every bit, and the manifest id is checked against the
//! recomputed content hash on load.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DatasetError, DatasetSnapshot, TransformSpec};
use crate::{Matrix, TaskKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub snapshot_id: String,
    pub parent_id: String,
    pub task_kind: TaskKind,
    pub n_samples: usize,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub target_name: String,
    /// Label map for classification targets read as strings (index = label).
    #[serde(default)]
    pub class_names: Vec<String>,
    /// Data file name, relative to the manifest.
    pub data_file: String,
    pub lineage: Vec<TransformSpec>,
}

fn file_stem(snapshot: &DatasetSnapshot) -> String {
    format!("snapshot-{}", &snapshot.snapshot_id()[..16])
}

/// Writes `<stem>.csv` and `<stem>.json` into `directory` and returns the manifest path.
pub fn save_snapshot(snapshot: &DatasetSnapshot, directory: &Path) -> Result<PathBuf, DatasetError> {
    fs::create_dir_all(directory).map_err(|e| DatasetError::io(directory, e))?;
    let stem = file_stem(snapshot);
    let data_path = directory.join(format!("{stem}.csv"));
    let manifest_path = directory.join(format!("{stem}.json"));

    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = snapshot.feature_names().iter().map(String::as_str).collect();
    header.push(snapshot.target_name());
    writer.write_record(&header).map_err(|e| csv_write_error(e, &data_path))?;
    let mut record = Vec::with_capacity(header.len());
    for (row, target) in snapshot.features().rows_iter().zip(snapshot.target()) {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(target.to_string());
        writer.write_record(&record).map_err(|e| csv_write_error(e, &data_path))?;
    }
    let bytes = writer.into_inner().map_err(|e| DatasetError::io(&data_path, e.into_error()))?;
    fs::write(&data_path, bytes).map_err(|e| DatasetError::io(&data_path, e))?;

    let manifest = SnapshotManifest {
        snapshot_id: snapshot.snapshot_id().to_string(),
        parent_id: snapshot.parent_id().to_string(),
        task_kind: snapshot.task_kind(),
        n_samples: snapshot.n_samples(),
        n_features: snapshot.n_features(),
        feature_names: snapshot.feature_names().to_vec(),
        target_name: snapshot.target_name().to_string(),
        class_names: snapshot.class_names().to_vec(),
        data_file: format!("{stem}.csv"),
        lineage: snapshot.lineage().to_vec(),
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&manifest_path, json).map_err(|e| DatasetError::io(&manifest_path, e))?;
    Ok(manifest_path)
}

fn csv_write_error(err: csv::Error, path: &Path) -> DatasetError {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => DatasetError::io(path, e),
        kind => DatasetError::io(path, std::io::Error::other(format!("{kind:?}"))),
    }
}

pub fn read_manifest(manifest_path: &Path) -> Result<SnapshotManifest, DatasetError> {
    let text = fs::read_to_string(manifest_path).map_err(|e| DatasetError::io(manifest_path, e))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::InvalidManifest {
        path: manifest_path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Loads a snapshot and verifies its content hash against the manifest.
pub fn load_snapshot(manifest_path: &Path) -> Result<DatasetSnapshot, DatasetError> {
    let manifest = read_manifest(manifest_path)?;
    let data_path = manifest_path.parent().unwrap_or_else(|| Path::new(".")).join(&manifest.data_file);
    let bytes = fs::read(&data_path).map_err(|e| DatasetError::io(&data_path, e))?;

    let mismatch = |actual: String| DatasetError::HashMismatch { expected: manifest.snapshot_id.clone(), actual };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(bytes.as_slice());
    let width = manifest.n_features + 1;
    let mut data = Vec::with_capacity(manifest.n_samples * manifest.n_features);
    let mut target = Vec::with_capacity(manifest.n_samples);
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| mismatch(format!("<unreadable data row {}: {e}>", r + 1)))?;
        if record.len() != width {
            return Err(mismatch(format!("<row {} has {} fields, expected {width}>", r + 1, record.len())));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| mismatch(format!("<unparseable cell {cell:?} at row {}>", r + 1)))?;
            if c + 1 == width {
                target.push(v);
            } else {
                data.push(v);
            }
        }
    }
    if target.len() != manifest.n_samples {
        return Err(mismatch(format!("<{} rows, manifest says {}>", target.len(), manifest.n_samples)));
    }

    let snapshot = DatasetSnapshot::build(
        Matrix::from_vec(target.len(), manifest.n_features, data),
        target,
        manifest.feature_names.clone(),
        manifest.target_name.clone(),
        manifest.task_kind,
        manifest.class_names.clone(),
        manifest.lineage.clone(),
        manifest.parent_id.clone(),
    )
    .map_err(|e| mismatch(format!("<invalid content: {e}>")))?;
    if snapshot.snapshot_id() != manifest.snapshot_id {
        return Err(mismatch(snapshot.snapshot_id().to_string()));
    }
    Ok(snapshot)
}
