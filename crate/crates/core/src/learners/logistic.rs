//! Logistic regression by fixed-step gradient descent.
//!
//! Two classes are handled by a single sigmoid model whose positive class is
//! the larger label. With more classes one binary model is trained per class
//! present (one-vs-rest) and the sigmoid scores are normalised to sum to 1.

use serde::{Deserialize, Serialize};

use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdSettings {
    pub learning_rate: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub l2: f64,
}

/// Weights and bias of one binary model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLogistic {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BinaryLogistic {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.bias + row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme")]
pub enum LogisticModel {
    Binary { n_classes: usize, negative: usize, positive: usize, model: BinaryLogistic },
    OneVsRest { n_classes: usize, classes: Vec<usize>, models: Vec<BinaryLogistic> },
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean negative log-likelihood plus `l2 / 2 · |w|²`. `y` holds 0/1 targets.
pub fn objective(weights: &[f64], bias: f64, x: &Matrix, y: &[f64], l2: f64) -> f64 {
    let n = x.nrows() as f64;
    let nll: f64 = x
        .rows_iter()
        .zip(y)
        .map(|(row, &t)| {
            let z = bias + row.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>();
            softplus(z) - t * z
        })
        .sum();
    nll / n + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`objective`]; returns `(d/dw, d/db)`.
pub fn gradient(weights: &[f64], bias: f64, x: &Matrix, y: &[f64], l2: f64) -> (Vec<f64>, f64) {
    let n = x.nrows() as f64;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (row, &t) in x.rows_iter().zip(y) {
        let z = bias + row.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>();
        let err = sigmoid(z) - t;
        for (g, a) in gw.iter_mut().zip(row) {
            *g += err * a;
        }
        gb += err;
    }
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (gw, gb / n)
}

fn fit_binary(x: &Matrix, y: &[f64], settings: &GdSettings) -> BinaryLogistic {
    let mut weights = vec![0.0; x.ncols()];
    let mut bias = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_iter {
        let (gw, gb) = gradient(&weights, bias, x, y, settings.l2);
        let norm = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if norm < settings.tol {
            converged = true;
            break;
        }
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= settings.learning_rate * g;
        }
        bias -= settings.learning_rate * gb;
        iterations += 1;
    }
    BinaryLogistic { weights, bias, iterations, converged }
}

impl LogisticModel {
    pub fn fit(x: &Matrix, labels: &[usize], n_classes: usize, settings: &GdSettings) -> Self {
        let mut classes = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() == 2 {
            let (negative, positive) = (classes[0], classes[1]);
            let y: Vec<f64> = labels.iter().map(|&l| if l == positive { 1.0 } else { 0.0 }).collect();
            return LogisticModel::Binary { n_classes, negative, positive, model: fit_binary(x, &y, settings) };
        }
        let models = classes
            .iter()
            .map(|&c| {
                let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { 0.0 }).collect();
                fit_binary(x, &y, settings)
            })
            .collect();
        LogisticModel::OneVsRest { n_classes, classes, models }
    }

    pub fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        match self {
            LogisticModel::Binary { n_classes, negative, positive, model } => {
                let p = model.probability(row);
                let mut out = vec![0.0; *n_classes];
                out[*positive] = p;
                out[*negative] = 1.0 - p;
                out
            }
            LogisticModel::OneVsRest { n_classes, classes, models } => {
                let scores: Vec<f64> = models.iter().map(|m| m.probability(row)).collect();
                let total: f64 = scores.iter().sum();
                let mut out = vec![0.0; *n_classes];
                for (&c, s) in classes.iter().zip(&scores) {
                    out[c] = if total > 0.0 { s / total } else { 1.0 / classes.len() as f64 };
                }
                out
            }
        }
    }
}
