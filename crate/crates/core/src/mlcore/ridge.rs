use serde::{Deserialize, Serialize};

use super::{DesignMatrix, MlError};

/// Linear model `y = w·x + b` fit with an L2 penalty on `w` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl RidgeModel {
    pub fn predict(&self, features: &[f64]) -> Result<f64, MlError> {
        ridge_predict(self, features)
    }
}

/// Solves `(XcᵀXc + λI) w = Xcᵀyc` on mean-centred features and targets, then
/// recovers the unpenalised intercept as `ȳ − w·x̄`.
pub fn ridge_fit(data: &DesignMatrix, lambda: f64) -> Result<RidgeModel, MlError> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(MlError::InvalidConfig(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let n = data.n_rows();
    let d = data.n_features();
    let nf = n as f64;

    let mut x_mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in x_mean.iter_mut().zip(data.row(i)) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= nf);
    let y_mean = data.targets().iter().sum::<f64>() / nf;

    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut centred = vec![0.0; d];
    for i in 0..n {
        for ((c, v), m) in centred.iter_mut().zip(data.row(i)).zip(&x_mean) {
            *c = v - m;
        }
        let yc = data.targets()[i] - y_mean;
        for a in 0..d {
            rhs[a] += centred[a] * yc;
            for b in 0..=a {
                gram[a * d + b] += centred[a] * centred[b];
            }
        }
    }
    for a in 0..d {
        gram[a * d + a] += lambda;
        for b in 0..a {
            gram[b * d + a] = gram[a * d + b];
        }
    }

    let weights = cholesky_solve(&mut gram, &rhs, d)?;
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(RidgeModel {
        weights,
        intercept,
        lambda,
    })
}

pub fn ridge_predict(model: &RidgeModel, features: &[f64]) -> Result<f64, MlError> {
    if features.len() != model.weights.len() {
        return Err(MlError::LengthMismatch {
            expected: model.weights.len(),
            found: features.len(),
        });
    }
    Ok(model
        .weights
        .iter()
        .zip(features)
        .fold(model.intercept, |acc, (w, x)| acc + w * x))
}

/// In-place Cholesky factorisation of the symmetric matrix `a` followed by
/// forward and back substitution.
fn cholesky_solve(a: &mut [f64], b: &[f64], d: usize) -> Result<Vec<f64>, MlError> {
    let scale = (0..d).map(|i| a[i * d + i].abs()).fold(1.0_f64, f64::max);
    let tol = 1e-12 * scale;
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if !(diag > tol) {
            return Err(MlError::RankDeficient);
        }
        let diag = diag.sqrt();
        a[j * d + j] = diag;
        for i in (j + 1)..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = s / diag;
        }
    }
    let mut z = vec![0.0; d];
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * d + k] * z[k];
        }
        z[i] = s / a[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut s = z[i];
        for k in (i + 1)..d {
            s -= a[k * d + i] * x[k];
        }
        x[i] = s / a[i * d + i];
    }
    Ok(x)
}
