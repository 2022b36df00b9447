use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::grow;
use super::{mix_seed, DesignMatrix, MlError, RegressionTree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `usize::MAX` means unlimited.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features considered at each node, in `(0, 1]`.
    pub feature_subsample_fraction: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 50,
            max_depth: 12,
            min_samples_leaf: 3,
            feature_subsample_fraction: 1.0,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), MlError> {
        if self.n_trees == 0 {
            return Err(MlError::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(MlError::InvalidConfig("min_samples_leaf must be >= 1".into()));
        }
        let f = self.feature_subsample_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(MlError::InvalidConfig(format!(
                "feature_subsample_fraction must be in (0, 1], got {f}"
            )));
        }
        Ok(())
    }

    pub(crate) fn features_per_node(&self, d: usize) -> usize {
        ((self.feature_subsample_fraction * d as f64).ceil() as usize).clamp(1, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<RegressionTree>,
    pub config: ForestConfig,
}

impl ForestModel {
    pub fn predict(&self, features: &[f64]) -> Result<f64, MlError> {
        forest_predict(self, features)
    }

    pub fn n_features(&self) -> usize {
        self.trees[0].n_features
    }
}

/// Fits `config.n_trees` trees. Tree `i` draws all of its randomness from a
/// stream derived from `(config.seed, i)`, so the parallel fit is
/// bit-identical to a serial one.
pub fn forest_fit(data: &DesignMatrix, config: &ForestConfig) -> Result<ForestModel, MlError> {
    config.validate()?;
    let n = data.n_rows();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, i as u64));
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(data, rows, config, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        config: config.clone(),
    })
}

/// Arithmetic mean of the trees' predictions, summed in tree order.
pub fn forest_predict(model: &ForestModel, features: &[f64]) -> Result<f64, MlError> {
    let d = model.n_features();
    if features.len() != d {
        return Err(MlError::LengthMismatch {
            expected: d,
            found: features.len(),
        });
    }
    let sum: f64 = model
        .trees
        .iter()
        .map(|t| t.predict_unchecked(features))
        .sum();
    Ok(sum / model.trees.len() as f64)
}
