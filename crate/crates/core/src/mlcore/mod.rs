//! Regression primitives: closed-form ridge, CART regression trees, random
//! forests and error metrics. Everything is dense `f64` and single-output.

mod forest;
mod ridge;
mod tree;

use serde::{Deserialize, Serialize};

pub use forest::{forest_fit, forest_predict, ForestConfig, ForestModel};
pub use ridge::{ridge_fit, ridge_predict, RidgeModel};
pub use tree::{tree_fit, RegressionTree, SplitChoice, TreeNode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MlError {
    #[error("design matrix has no rows")]
    Empty,
    #[error("design matrix has no features")]
    NoFeatures,
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("rank-deficient normal equations; refit with lambda > 0")]
    RankDeficient,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// `n × d` feature matrix (row-major) with one regression target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    n_features: usize,
    values: Vec<f64>,
    targets: Vec<f64>,
    feature_names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self, MlError> {
        let d = rows.first().map(Vec::len).ok_or(MlError::Empty)?;
        let mut values = Vec::with_capacity(rows.len() * d);
        for row in &rows {
            if row.len() != d {
                return Err(MlError::LengthMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(values, d, targets, feature_names)
    }

    pub fn from_flat(
        values: Vec<f64>,
        n_features: usize,
        targets: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self, MlError> {
        if n_features == 0 {
            return Err(MlError::NoFeatures);
        }
        if targets.is_empty() {
            return Err(MlError::Empty);
        }
        if values.len() != targets.len() * n_features {
            return Err(MlError::LengthMismatch {
                expected: targets.len() * n_features,
                found: values.len(),
            });
        }
        if feature_names.len() != n_features {
            return Err(MlError::LengthMismatch {
                expected: n_features,
                found: feature_names.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MlError::NonFinite {
                row: i / n_features,
                col: i % n_features,
            });
        }
        if let Some(row) = targets.iter().position(|v| !v.is_finite()) {
            return Err(MlError::NonFinite {
                row,
                col: n_features,
            });
        }
        Ok(DesignMatrix {
            n_rows: targets.len(),
            n_features,
            values,
            targets,
            feature_names,
        })
    }

    /// Feature names `x0..x{d-1}`, handy for tests and ad-hoc data.
    pub fn anonymous(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, MlError> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        let names = (0..d).map(|i| format!("x{i}")).collect();
        Self::new(rows, targets, names)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.values[row * self.n_features + feature]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Copies the given rows (repeats allowed) into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_features);
        let mut targets = Vec::with_capacity(rows.len());
        for &r in rows {
            values.extend_from_slice(self.row(r));
            targets.push(self.targets[r]);
        }
        DesignMatrix {
            n_rows: rows.len(),
            n_features: self.n_features,
            values,
            targets,
            feature_names: self.feature_names.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: f64,
    pub mae: f64,
    pub n_samples: usize,
}

/// Root mean squared error and mean absolute error.
pub fn rmse(predictions: &[f64], actuals: &[f64]) -> Result<EvalReport, MlError> {
    if predictions.len() != actuals.len() {
        return Err(MlError::LengthMismatch {
            expected: actuals.len(),
            found: predictions.len(),
        });
    }
    if actuals.is_empty() {
        return Err(MlError::Empty);
    }
    let n = actuals.len() as f64;
    let (sq, abs) = predictions
        .iter()
        .zip(actuals)
        .fold((0.0, 0.0), |(sq, abs), (p, a)| {
            let e = p - a;
            (sq + e * e, abs + e.abs())
        });
    Ok(EvalReport {
        rmse: (sq / n).sqrt(),
        mae: abs / n,
        n_samples: actuals.len(),
    })
}

/// SplitMix64 finalizer, used to derive independent RNG streams from one seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a, stable across platforms and compiler versions.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}
