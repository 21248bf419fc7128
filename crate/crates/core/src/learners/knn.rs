use serde::{Deserialize, Serialize};

use super::majority;
use crate::{Matrix, TaskKind};

/// k-nearest neighbours under Euclidean distance. Distance ties go to the
/// lower training index; vote ties go to the smaller label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub task: TaskKind,
    pub n_classes: usize,
    pub features: Matrix,
    pub target: Vec<f64>,
}

impl KnnModel {
    pub fn fit(features: &Matrix, target: &[f64], k: usize, task: TaskKind, n_classes: usize) -> Self {
        Self { k, task, n_classes, features: features.clone(), target: target.to_vec() }
    }

    /// Indices of the `k` nearest training rows, nearest first.
    pub fn neighbors(&self, query: &[f64]) -> Vec<usize> {
        let mut scored: Vec<(f64, usize)> = self
            .features
            .rows_iter()
            .enumerate()
            .map(|(i, row)| (row.iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    pub fn predict_row(&self, query: &[f64]) -> f64 {
        match self.task {
            TaskKind::Regression => {
                let nn = self.neighbors(query);
                nn.iter().map(|&i| self.target[i]).sum::<f64>() / nn.len() as f64
            }
            TaskKind::Classification => majority(&self.proba_row(query)) as f64,
        }
    }

    /// Neighbour label fractions.
    pub fn proba_row(&self, query: &[f64]) -> Vec<f64> {
        let mut counts = vec![0.0; self.n_classes];
        for i in self.neighbors(query) {
            counts[self.target[i] as usize] += 1.0;
        }
        counts.iter().map(|c| c / self.k as f64).collect()
    }
}
