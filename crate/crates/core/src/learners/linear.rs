use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, w)| x * w).sum::<f64>()
    }
}

/// Ordinary least squares with intercept, solved through an SVD of the
/// design matrix `[X | 1]`. Singular values below the usual rank tolerance
/// are dropped, which yields the minimum-norm solution for rank-deficient
/// systems. Returns the model and whether the system was rank deficient.
pub fn fit_ols(features: &Matrix, target: &[f64]) -> (LinearModel, bool) {
    let (n, p) = (features.nrows(), features.ncols());
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j < p { features.get(i, j) } else { 1.0 });
    let y = DVector::from_column_slice(target);
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * f64::EPSILON * n.max(p + 1) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let solution = svd.solve(&y, tol).expect("U and V^T were computed");
    let model = LinearModel { coefficients: solution.as_slice()[..p].to_vec(), intercept: solution[p] };
    (model, rank < p + 1)
}

/// Ridge regression with an unpenalised intercept: the penalised normal
/// equations are solved on centred data.
pub fn fit_ridge(features: &Matrix, target: &[f64], alpha: f64) -> LinearModel {
    let (n, p) = (features.nrows(), features.ncols());
    let x_mean: Vec<f64> = (0..p).map(|j| features.column(j).iter().sum::<f64>() / n as f64).collect();
    let y_mean = target.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, p, |i, j| features.get(i, j) - x_mean[j]);
    let yc = DVector::from_iterator(n, target.iter().map(|y| y - y_mean));
    let mut gram = xc.transpose() * &xc;
    for j in 0..p {
        gram[(j, j)] += alpha;
    }
    let rhs = xc.transpose() * yc;
    let w = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => {
            let svd = gram.svd(true, true);
            let tol = svd.singular_values.max() * f64::EPSILON * p as f64;
            svd.solve(&rhs, tol).expect("U and V^T were computed")
        }
    };
    let intercept = y_mean - w.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    LinearModel { coefficients: w.as_slice().to_vec(), intercept }
}
