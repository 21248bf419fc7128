//! One-hidden-layer perceptron trained by full-batch gradient descent.
//!
//! Hidden units use `tanh`. Regression has a single linear output trained on
//! mean squared error against standardised targets; classification has one
//! softmax output per class trained on mean cross-entropy. A seeded fraction
//! of the training rows is held out for early stopping and the weights with
//! the lowest validation loss are restored at the end.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::majority;
use crate::rng::{mix_tagged, rng_from_seed};
use crate::{Matrix, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStopping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub stopped_epoch: usize,
    pub stop_reason: StopReason,
    /// 1-based epoch whose weights were restored; 0 if no epoch improved on
    /// the initial weights.
    pub best_epoch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpSettings {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

/// Flat parameter vector laid out as `[W1 (h×p), b1 (h), W2 (o×h), b2 (o)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub values: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        let len = hidden * inputs + hidden + outputs * hidden + outputs;
        Self { inputs, hidden, outputs, values: vec![0.0; len] }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs * self.hidden;
        (b1, w2, b2)
    }

    /// Hidden activations and raw outputs for one row.
    fn forward(&self, row: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (b1, w2, b2) = self.offsets();
        let v = &self.values;
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|u| {
                let w = &v[u * self.inputs..(u + 1) * self.inputs];
                (v[b1 + u] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>()).tanh()
            })
            .collect();
        let out = (0..self.outputs)
            .map(|o| {
                let w = &v[w2 + o * self.hidden..w2 + (o + 1) * self.hidden];
                v[b2 + o] + w.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        (hidden, out)
    }
}

/// Training targets: standardised reals or class labels.
#[derive(Debug, Clone, PartialEq)]
pub enum MlpTargets {
    Regression(Vec<f64>),
    Classification(Vec<usize>),
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean loss over the rows of `x`.
pub fn loss(params: &MlpParams, x: &Matrix, targets: &MlpTargets) -> f64 {
    let n = x.nrows() as f64;
    let total: f64 = x
        .rows_iter()
        .enumerate()
        .map(|(i, row)| {
            let (_, out) = params.forward(row);
            match targets {
                MlpTargets::Regression(y) => (out[0] - y[i]).powi(2),
                MlpTargets::Classification(y) => {
                    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + out.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    lse - out[y[i]]
                }
            }
        })
        .sum();
    total / n
}

/// Mean loss and its gradient by backpropagation.
pub fn loss_and_gradient(params: &MlpParams, x: &Matrix, targets: &MlpTargets) -> (f64, Vec<f64>) {
    let (b1, w2, b2) = params.offsets();
    let (p, h, o) = (params.inputs, params.hidden, params.outputs);
    let n = x.nrows() as f64;
    let mut grad = vec![0.0; params.values.len()];
    let mut total = 0.0;
    for (i, row) in x.rows_iter().enumerate() {
        let (hidden, out) = params.forward(row);
        // dL/d(out) for this sample, before the 1/n factor
        let delta_out: Vec<f64> = match targets {
            MlpTargets::Regression(y) => {
                let r = out[0] - y[i];
                total += r * r;
                vec![2.0 * r]
            }
            MlpTargets::Classification(y) => {
                let prob = softmax(&out);
                total -= prob[y[i]].max(f64::MIN_POSITIVE).ln();
                prob.iter().enumerate().map(|(c, pc)| pc - if c == y[i] { 1.0 } else { 0.0 }).collect()
            }
        };
        let mut delta_hidden = vec![0.0; h];
        for k in 0..o {
            grad[b2 + k] += delta_out[k];
            for u in 0..h {
                grad[w2 + k * h + u] += delta_out[k] * hidden[u];
                delta_hidden[u] += delta_out[k] * params.values[w2 + k * h + u];
            }
        }
        for u in 0..h {
            let d = delta_hidden[u] * (1.0 - hidden[u] * hidden[u]);
            grad[b1 + u] += d;
            for j in 0..p {
                grad[u * p + j] += d * row[j];
            }
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (total / n, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub task: TaskKind,
    pub n_classes: usize,
    pub params: MlpParams,
    /// Regression targets are standardised with these during training.
    pub target_mean: f64,
    pub target_scale: f64,
}

impl MlpModel {
    pub fn fit(x: &Matrix, y: &[f64], task: TaskKind, n_classes: usize, settings: &MlpSettings) -> (Self, TrainingTrace) {
        let n = x.nrows();
        let n_val = ((settings.validation_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from_seed(mix_tagged(settings.seed, "mlp-split", 0)));
        let (val_rows, train_rows) = order.split_at(n_val);
        let (mut val_rows, mut train_rows) = (val_rows.to_vec(), train_rows.to_vec());
        val_rows.sort_unstable();
        train_rows.sort_unstable();

        let (target_mean, target_scale) = match task {
            TaskKind::Regression => {
                let t: Vec<f64> = train_rows.iter().map(|&i| y[i]).collect();
                let mean = t.iter().sum::<f64>() / t.len() as f64;
                let var = t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t.len() as f64;
                (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
            }
            TaskKind::Classification => (0.0, 1.0),
        };
        let targets_for = |rows: &[usize]| match task {
            TaskKind::Regression => MlpTargets::Regression(rows.iter().map(|&i| (y[i] - target_mean) / target_scale).collect()),
            TaskKind::Classification => MlpTargets::Classification(rows.iter().map(|&i| y[i] as usize).collect()),
        };
        let (x_train, t_train) = (x.select_rows(&train_rows), targets_for(&train_rows));
        let (x_val, t_val) = (x.select_rows(&val_rows), targets_for(&val_rows));

        let outputs = match task {
            TaskKind::Regression => 1,
            TaskKind::Classification => n_classes,
        };
        let mut params = MlpParams::zeros(x.ncols(), settings.hidden_units, outputs);
        let mut rng = rng_from_seed(mix_tagged(settings.seed, "mlp-init", 0));
        let (_, w2, b2) = params.offsets();
        let b1 = settings.hidden_units * x.ncols();
        let limit_in = 1.0 / (x.ncols() as f64).sqrt();
        let limit_hidden = 1.0 / (settings.hidden_units as f64).sqrt();
        for v in &mut params.values[..b1] {
            *v = rng.random_range(-limit_in..=limit_in);
        }
        for v in &mut params.values[w2..b2] {
            *v = rng.random_range(-limit_hidden..=limit_hidden);
        }

        let mut best = params.clone();
        let mut best_val = f64::INFINITY;
        let mut best_epoch = 0;
        let mut reference = f64::INFINITY;
        let mut wait = 0;
        let mut train_loss = Vec::new();
        let mut validation_loss = Vec::new();
        let mut stop_reason = StopReason::MaxEpochs;
        for epoch in 1..=settings.max_epochs {
            let (_, grad) = loss_and_gradient(&params, &x_train, &t_train);
            for (v, g) in params.values.iter_mut().zip(&grad) {
                *v -= settings.learning_rate * g;
            }
            let tl = loss(&params, &x_train, &t_train);
            let vl = loss(&params, &x_val, &t_val);
            train_loss.push(tl);
            validation_loss.push(vl);
            if vl < best_val {
                best_val = vl;
                best = params.clone();
                best_epoch = epoch;
            }
            if vl < reference - settings.min_delta {
                reference = vl;
                wait = 0;
            } else {
                wait += 1;
                if wait >= settings.patience {
                    stop_reason = StopReason::EarlyStopping;
                    break;
                }
            }
        }
        let trace = TrainingTrace {
            stopped_epoch: train_loss.len(),
            train_loss,
            validation_loss,
            stop_reason,
            best_epoch,
        };
        (Self { task, n_classes, params: best, target_mean, target_scale }, trace)
    }

    pub fn predict_regression(&self, x: &Matrix) -> Vec<f64> {
        x.rows_iter()
            .map(|row| self.params.forward(row).1[0] * self.target_scale + self.target_mean)
            .collect()
    }

    pub fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        softmax(&self.params.forward(row).1)
    }

    pub fn predict_label(&self, row: &[f64]) -> usize {
        majority(&self.proba_row(row))
    }
}
