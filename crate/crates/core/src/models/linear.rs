//! Ordinary least squares via the normal equations.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::matrix::Matrix;

/// Pivots below this fraction of the largest Gram diagonal count as singular.
const SINGULAR_RATIO: f64 = 1e-10;
const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(c, x)| c * x).sum::<f64>()
    }
}

/// Gaussian elimination with partial pivoting. `None` if a pivot falls to or
/// below `min_pivot` (or is not finite).
#[allow(clippy::needless_range_loop)]
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, min_pivot: f64) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        let pivot = a[pivot_row][col];
        if !pivot.is_finite() || pivot.abs() <= min_pivot {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Like [`fit_ols`], also reporting whether the ridge fallback engaged.
#[allow(clippy::needless_range_loop)]
pub fn fit_ols_detailed(x: &Matrix, y: &[f64]) -> Result<(LinearModel, bool), ModelError> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(ModelError::DimensionMismatch { expected: n, got: y.len() });
    }
    if n < p + 1 {
        return Err(ModelError::InvalidParam(format!("OLS needs at least {} rows, got {n}", p + 1)));
    }
    // Gram matrix of [X | 1]; the intercept is the last unknown.
    let dim = p + 1;
    let mut gram = vec![vec![0.0; dim]; dim];
    let mut rhs = vec![0.0; dim];
    let mut aug = vec![0.0; dim];
    for (row, &target) in x.iter_rows().zip(y) {
        aug[..p].copy_from_slice(row);
        aug[p] = 1.0;
        for i in 0..dim {
            rhs[i] += aug[i] * target;
            for j in i..dim {
                gram[i][j] += aug[i] * aug[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            gram[i][j] = gram[j][i];
        }
    }
    let max_diag = (0..dim).map(|i| gram[i][i]).fold(0.0f64, f64::max);

    let (beta, ridged) = match solve(gram.clone(), rhs.clone(), SINGULAR_RATIO * max_diag) {
        Some(beta) => (beta, false),
        None => {
            for (i, row) in gram.iter_mut().enumerate() {
                row[i] += RIDGE;
            }
            let beta = solve(gram, rhs, 0.0).ok_or(ModelError::SingularAfterRidge)?;
            (beta, true)
        }
    };
    Ok((LinearModel { coefficients: beta[..p].to_vec(), intercept: beta[p] }, ridged))
}

/// Least-squares coefficients and intercept.
pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<LinearModel, ModelError> {
    fit_ols_detailed(x, y).map(|(m, _)| m)
}
