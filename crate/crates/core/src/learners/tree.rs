//! CART trees.
//!
//! Splits are searched exhaustively over midpoints between consecutive
//! distinct feature values, minimising weighted Gini impurity
//! (classification) or the within-child sum of squares (regression). Samples
//! with `x <= threshold` go left. Among equally good splits the first one
//! found wins, i.e. the lowest feature index and then the lowest threshold.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::majority;
use crate::{Matrix, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_samples_leaf: 1, min_samples_split: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Mean target (regression) or majority label (classification).
        value: f64,
        /// Class fractions; empty for regression.
        distribution: Vec<f64>,
        n_samples: usize,
    },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub task: TaskKind,
    pub n_classes: usize,
    pub nodes: Vec<Node>,
}

/// Per-node random feature subsampling, used by forests.
pub(crate) struct FeatureSampler<'a> {
    pub max_features: usize,
    pub rng: &'a mut ChaCha8Rng,
}

struct Builder<'a, 's> {
    x: &'a Matrix,
    y: &'a [f64],
    task: TaskKind,
    n_classes: usize,
    params: &'a TreeParams,
    sampler: Option<FeatureSampler<'s>>,
    nodes: Vec<Node>,
}

struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_, '_> {
    fn leaf(&self, rows: &[usize]) -> Node {
        match self.task {
            TaskKind::Regression => Node::Leaf {
                value: if self.is_pure(rows) {
                    self.y[rows[0]]
                } else {
                    rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64
                },
                distribution: Vec::new(),
                n_samples: rows.len(),
            },
            TaskKind::Classification => {
                let mut counts = vec![0.0; self.n_classes];
                rows.iter().for_each(|&i| counts[self.y[i] as usize] += 1.0);
                let value = majority(&counts) as f64;
                let n = rows.len() as f64;
                Node::Leaf { value, distribution: counts.iter().map(|c| c / n).collect(), n_samples: rows.len() }
            }
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.y[rows[0]];
        rows.iter().all(|&i| self.y[i] == first)
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.ncols();
        match &mut self.sampler {
            Some(s) if s.max_features < p => {
                let mut features = sample(s.rng, p, s.max_features).into_vec();
                features.sort_unstable();
                features
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Candidate> {
        let min_leaf = self.params.min_samples_leaf;
        let n = rows.len();
        let mut best: Option<Candidate> = None;
        let mut order = rows.to_vec();
        for feature in self.candidate_features() {
            order.copy_from_slice(rows);
            order.sort_by(|&a, &b| self.x.get(a, feature).total_cmp(&self.x.get(b, feature)).then(a.cmp(&b)));
            let value = |pos: usize| self.x.get(order[pos], feature);

            let mut sweep = Sweep::new(self.task, self.n_classes, &order, self.y);
            for pos in 0..n - 1 {
                sweep.move_left(self.y[order[pos]]);
                let left_n = pos + 1;
                if left_n < min_leaf || n - left_n < min_leaf {
                    continue;
                }
                let (lo, hi) = (value(pos), value(pos + 1));
                if lo >= hi {
                    continue;
                }
                let score = sweep.score();
                if best.as_ref().is_none_or(|b| score < b.score) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid >= hi { lo } else { mid };
                    best = Some(Candidate { score, feature, threshold });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let index = self.nodes.len();
        self.nodes.push(self.leaf(&rows));
        let n = rows.len();
        let stop = self.params.max_depth.is_some_and(|d| depth >= d)
            || n < self.params.min_samples_split
            || n < 2 * self.params.min_samples_leaf
            || self.is_pure(&rows);
        if stop {
            return index;
        }
        let Some(split) = self.best_split(&rows) else {
            return index;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x.get(i, split.feature) <= split.threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[index] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        index
    }
}

/// Running left/right statistics while sweeping sorted samples.
enum Sweep {
    Gini { left: Vec<f64>, right: Vec<f64>, n_left: f64, n_right: f64 },
    Variance { sum_l: f64, sq_l: f64, sum_r: f64, sq_r: f64, n_left: f64, n_right: f64 },
}

impl Sweep {
    fn new(task: TaskKind, n_classes: usize, rows: &[usize], y: &[f64]) -> Self {
        let n = rows.len() as f64;
        match task {
            TaskKind::Classification => {
                let mut right = vec![0.0; n_classes];
                rows.iter().for_each(|&i| right[y[i] as usize] += 1.0);
                Sweep::Gini { left: vec![0.0; n_classes], right, n_left: 0.0, n_right: n }
            }
            TaskKind::Regression => {
                let sum_r = rows.iter().map(|&i| y[i]).sum();
                let sq_r = rows.iter().map(|&i| y[i] * y[i]).sum();
                Sweep::Variance { sum_l: 0.0, sq_l: 0.0, sum_r, sq_r, n_left: 0.0, n_right: n }
            }
        }
    }

    fn move_left(&mut self, t: f64) {
        match self {
            Sweep::Gini { left, right, n_left, n_right } => {
                left[t as usize] += 1.0;
                right[t as usize] -= 1.0;
                *n_left += 1.0;
                *n_right -= 1.0;
            }
            Sweep::Variance { sum_l, sq_l, sum_r, sq_r, n_left, n_right } => {
                *sum_l += t;
                *sq_l += t * t;
                *sum_r -= t;
                *sq_r -= t * t;
                *n_left += 1.0;
                *n_right -= 1.0;
            }
        }
    }

    /// Weighted child impurity (lower is better).
    fn score(&self) -> f64 {
        match self {
            Sweep::Gini { left, right, n_left, n_right } => {
                let weighted_gini = |counts: &[f64], n: f64| n - counts.iter().map(|c| c * c).sum::<f64>() / n;
                weighted_gini(left, *n_left) + weighted_gini(right, *n_right)
            }
            Sweep::Variance { sum_l, sq_l, sum_r, sq_r, n_left, n_right } => {
                (sq_l - sum_l * sum_l / n_left).max(0.0) + (sq_r - sum_r * sum_r / n_right).max(0.0)
            }
        }
    }
}

impl Tree {
    pub(crate) fn fit(
        x: &Matrix,
        y: &[f64],
        task: TaskKind,
        n_classes: usize,
        params: &TreeParams,
        sampler: Option<FeatureSampler<'_>>,
    ) -> Self {
        Self::fit_rows(x, y, (0..x.nrows()).collect(), task, n_classes, params, sampler)
    }

    pub(crate) fn fit_rows(
        x: &Matrix,
        y: &[f64],
        rows: Vec<usize>,
        task: TaskKind,
        n_classes: usize,
        params: &TreeParams,
        sampler: Option<FeatureSampler<'_>>,
    ) -> Self {
        let mut builder = Builder { x, y, task, n_classes, params, sampler, nodes: Vec::new() };
        builder.grow(rows, 0);
        Tree { task, n_classes, nodes: builder.nodes }
    }

    fn leaf_for(&self, row: &[f64]) -> &Node {
        let mut node = &self.nodes[0];
        while let Node::Split { feature, threshold, left, right } = node {
            node = &self.nodes[if row[*feature] <= *threshold { *left } else { *right }];
        }
        node
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.leaf_for(row) {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        match self.leaf_for(row) {
            Node::Leaf { distribution, .. } => distribution.clone(),
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
