use rand::Rng;
use serde::{Deserialize, Serialize};

use super::majority;
use super::tree::{FeatureSampler, Tree, TreeParams};
use crate::rng::{mix_tagged, rng_from_seed};
use crate::{Matrix, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

/// Bagged CART trees with per-split feature subsampling. Tree `i` draws its
/// bootstrap sample and feature subsets from streams seeded by `(seed, i)`.
/// Classification uses majority vote, regression the mean prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub task: TaskKind,
    pub n_classes: usize,
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(x: &Matrix, y: &[f64], task: TaskKind, n_classes: usize, params: &ForestParams, seed: u64) -> Self {
        let n = x.nrows();
        let trees = (0..params.n_trees as u64)
            .map(|i| {
                let rows: Vec<usize> = if params.bootstrap {
                    let mut rng = rng_from_seed(mix_tagged(seed, "bootstrap", i));
                    let mut rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    rows.sort_unstable();
                    rows
                } else {
                    (0..n).collect()
                };
                let mut rng = rng_from_seed(mix_tagged(seed, "features", i));
                let sampler = FeatureSampler { max_features: params.max_features, rng: &mut rng };
                Tree::fit_rows(x, y, rows, task, n_classes, &params.tree, Some(sampler))
            })
            .collect();
        Self { task, n_classes, trees }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.task {
            TaskKind::Regression => self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64,
            TaskKind::Classification => majority(&self.proba_row(row)) as f64,
        }
    }

    /// Fractions of tree votes per class.
    pub fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict_row(row) as usize] += 1.0;
        }
        let total = self.trees.len() as f64;
        votes.iter().map(|v| v / total).collect()
    }
}
