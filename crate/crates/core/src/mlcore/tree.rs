use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DesignMatrix, ForestConfig, MlError};

/// A node in the flat tree arena. Children are indices into
/// [`RegressionTree::nodes`]; inputs with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Serialised column-wise (see [`TreeColumns`]) to keep bundles small.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TreeColumns", try_from = "TreeColumns")]
pub struct RegressionTree {
    pub n_features: usize,
    /// Root is `nodes[0]`.
    pub nodes: Vec<TreeNode>,
}

/// On-disk layout of a tree: one entry per node in each column. Leaves have
/// `feature == -1`, carry their prediction in `value` and their sample count
/// in `n_samples`; splits carry the threshold in `value` and child indices
/// in `left`/`right`. Unused slots are 0.
#[derive(Serialize, Deserialize)]
struct TreeColumns {
    n_features: usize,
    feature: Vec<i64>,
    value: Vec<f64>,
    left: Vec<usize>,
    right: Vec<usize>,
    n_samples: Vec<usize>,
}

impl From<RegressionTree> for TreeColumns {
    fn from(tree: RegressionTree) -> Self {
        let n = tree.nodes.len();
        let mut cols = TreeColumns {
            n_features: tree.n_features,
            feature: Vec::with_capacity(n),
            value: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            n_samples: Vec::with_capacity(n),
        };
        for node in tree.nodes {
            let (f, v, l, r, s) = match node {
                TreeNode::Leaf { value, n_samples } => (-1, value, 0, 0, n_samples),
                TreeNode::Split { feature, threshold, left, right } => {
                    (feature as i64, threshold, left, right, 0)
                }
            };
            cols.feature.push(f);
            cols.value.push(v);
            cols.left.push(l);
            cols.right.push(r);
            cols.n_samples.push(s);
        }
        cols
    }
}

impl TryFrom<TreeColumns> for RegressionTree {
    type Error = String;

    fn try_from(c: TreeColumns) -> Result<Self, String> {
        let n = c.feature.len();
        if n == 0 {
            return Err("tree has no nodes".into());
        }
        if [c.value.len(), c.left.len(), c.right.len(), c.n_samples.len()]
            .iter()
            .any(|&len| len != n)
        {
            return Err("tree columns differ in length".into());
        }
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let node = match c.feature[i] {
                -1 => TreeNode::Leaf { value: c.value[i], n_samples: c.n_samples[i] },
                f if f >= 0 && (f as usize) < c.n_features => {
                    let (left, right) = (c.left[i], c.right[i]);
                    // children are always allocated after their parent
                    if left <= i || right <= i || left >= n || right >= n {
                        return Err(format!("node {i} has bad children {left}, {right}"));
                    }
                    TreeNode::Split { feature: f as usize, threshold: c.value[i], left, right }
                }
                f => return Err(format!("node {i} has bad feature {f}")),
            };
            nodes.push(node);
        }
        Ok(RegressionTree { n_features: c.n_features, nodes })
    }
}

/// The split chosen for a node, as `(feature, threshold)` plus its score
/// (sum of squared deviations in the two children).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub score: f64,
}

impl RegressionTree {
    pub fn predict(&self, features: &[f64]) -> Result<f64, MlError> {
        if features.len() != self.n_features {
            return Err(MlError::LengthMismatch {
                expected: self.n_features,
                found: features.len(),
            });
        }
        Ok(self.predict_unchecked(features))
    }

    pub(crate) fn predict_unchecked(&self, features: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()? {
            TreeNode::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            TreeNode::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

/// Fits one CART regression tree on every row of `data`.
///
/// Bootstrap resampling is a forest concern; this uses the rows as given.
/// `rng` drives per-node feature subsampling only.
pub fn tree_fit<R: Rng + ?Sized>(
    data: &DesignMatrix,
    config: &ForestConfig,
    rng: &mut R,
) -> Result<RegressionTree, MlError> {
    config.validate()?;
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    Ok(grow(data, rows, config, rng))
}

pub(crate) fn grow<R: Rng + ?Sized>(
    data: &DesignMatrix,
    rows: Vec<usize>,
    config: &ForestConfig,
    rng: &mut R,
) -> RegressionTree {
    let d = data.n_features();
    let mut nodes = vec![TreeNode::Leaf {
        value: 0.0,
        n_samples: 0,
    }];
    let mut pending = vec![(0usize, rows, 0usize)];
    let mut features: Vec<usize> = (0..d).collect();

    while let Some((id, rows, depth)) = pending.pop() {
        let targets = data.targets();
        let first = targets[rows[0]];
        let pure = rows.iter().all(|&r| targets[r] == first);
        let leaf_value = if pure {
            first
        } else {
            rows.iter().map(|&r| targets[r]).sum::<f64>() / rows.len() as f64
        };

        let can_split =
            !pure && depth < config.max_depth && rows.len() >= 2 * config.min_samples_leaf;
        let split = if can_split {
            choose_split(data, &rows, config, rng, &mut features)
        } else {
            None
        };

        match split {
            None => {
                nodes[id] = TreeNode::Leaf {
                    value: leaf_value,
                    n_samples: rows.len(),
                };
            }
            Some(s) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&r| data.value(r, s.feature) <= s.threshold);
                let left = nodes.len();
                let right = left + 1;
                nodes.push(TreeNode::Leaf {
                    value: 0.0,
                    n_samples: 0,
                });
                nodes.push(TreeNode::Leaf {
                    value: 0.0,
                    n_samples: 0,
                });
                nodes[id] = TreeNode::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                };
                pending.push((right, right_rows, depth + 1));
                pending.push((left, left_rows, depth + 1));
            }
        }
    }
    RegressionTree {
        n_features: d,
        nodes,
    }
}

/// Draws the node's feature subset, then searches it. If no sampled feature
/// admits a valid split, the remaining features are searched as well.
fn choose_split<R: Rng + ?Sized>(
    data: &DesignMatrix,
    rows: &[usize],
    config: &ForestConfig,
    rng: &mut R,
    features: &mut [usize],
) -> Option<SplitChoice> {
    let d = features.len();
    let k = config.features_per_node(d);
    if k >= d {
        return best_split(data, rows, 0..d, config.min_samples_leaf);
    }
    for (i, f) in features.iter_mut().enumerate() {
        *f = i;
    }
    for i in 0..k {
        let j = rng.random_range(i..d);
        features.swap(i, j);
    }
    let (sampled, rest) = features.split_at_mut(k);
    sampled.sort_unstable();
    best_split(data, rows, sampled.iter().copied(), config.min_samples_leaf).or_else(|| {
        rest.sort_unstable();
        best_split(data, rows, rest.iter().copied(), config.min_samples_leaf)
    })
}

/// Exhaustive search over midpoints between sorted distinct values of each
/// candidate feature. Minimises the summed squared deviation of the two
/// children; ties go to the lower feature index, then the lower threshold.
pub(crate) fn best_split(
    data: &DesignMatrix,
    rows: &[usize],
    features: impl Iterator<Item = usize>,
    min_samples_leaf: usize,
) -> Option<SplitChoice> {
    let m = rows.len();
    if m < 2 * min_samples_leaf.max(1) {
        return None;
    }
    let targets = data.targets();
    // Shift by the node mean to keep the running sums well conditioned.
    let shift = rows.iter().map(|&r| targets[r]).sum::<f64>() / m as f64;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(m);
    let node_sse: f64 = rows.iter().map(|&r| (targets[r] - shift).powi(2)).sum();
    // Candidates inducing the same partition can differ in the last bits
    // depending on summation order; treat those as ties.
    let tie_tol = 1e-10 * node_sse;
    let mut best: Option<SplitChoice> = None;

    for feature in features {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (data.value(r, feature), targets[r] - shift)));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[m - 1].0 {
            continue;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();

        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for p in 1..m {
            let y = pairs[p - 1].1;
            left_sum += y;
            left_sq += y * y;
            let (lo, hi) = (pairs[p - 1].0, pairs[p].0);
            if lo == hi || p < min_samples_leaf || m - p < min_samples_leaf {
                continue;
            }
            let nl = p as f64;
            let nr = (m - p) as f64;
            let right_sum = total - left_sum;
            let right_sq = total_sq - left_sq;
            let score = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
            if best.is_none_or(|b| score < b.score - tie_tol) {
                best = Some(SplitChoice {
                    feature,
                    threshold: midpoint(lo, hi),
                    score,
                });
            }
        }
    }
    best
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(max_depth: usize) -> ForestConfig {
        ForestConfig {
            n_trees: 1,
            max_depth,
            min_samples_leaf: 1,
            feature_subsample_fraction: 1.0,
            bootstrap: false,
            seed: 1,
        }
    }

    #[test]
    fn single_sample_is_a_leaf() {
        let data = DesignMatrix::anonymous(vec![vec![1.0]], vec![5.0]).unwrap();
        let t = tree_fit(&data, &cfg(10), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict(&[-100.0]).unwrap(), 5.0);
        assert_eq!(t.predict(&[1.0]).unwrap(), 5.0);
    }

    #[test]
    fn depth_zero_predicts_the_mean() {
        let data =
            DesignMatrix::anonymous(vec![vec![1.0], vec![2.0], vec![9.0]], vec![1.0, 2.0, 6.0])
                .unwrap();
        let t = tree_fit(&data, &cfg(0), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict(&[4.0]).unwrap(), 3.0);
    }

    #[test]
    fn splits_a_step_function_at_the_midpoint() {
        let data = DesignMatrix::anonymous(
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![0.0, 0.0, 10.0, 10.0],
        )
        .unwrap();
        let t = tree_fit(&data, &cfg(5), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.root_split(), Some((0, 2.5)));
        assert_eq!(t.depth(), 1);
        assert_eq!(t.predict(&[2.4]).unwrap(), 0.0);
        assert_eq!(t.predict(&[2.6]).unwrap(), 10.0);
    }

    #[test]
    fn equal_scores_prefer_the_lower_feature() {
        // Both columns separate the targets identically.
        let data = DesignMatrix::anonymous(
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            vec![0.0, 1.0],
        )
        .unwrap();
        let t = tree_fit(&data, &cfg(1), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.root_split(), Some((0, 0.5)));
    }

    #[test]
    fn min_samples_leaf_limits_splits() {
        let data = DesignMatrix::anonymous(
            vec![vec![1.0], vec![2.0], vec![3.0]],
            vec![0.0, 0.0, 30.0],
        )
        .unwrap();
        let mut c = cfg(5);
        c.min_samples_leaf = 2;
        let t = tree_fit(&data, &c, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn constant_features_give_a_leaf() {
        let data = DesignMatrix::anonymous(vec![vec![2.0], vec![2.0]], vec![1.0, 3.0]).unwrap();
        let t = tree_fit(&data, &cfg(5), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.predict(&[2.0]).unwrap(), 2.0);
    }

    #[test]
    fn subsampling_falls_back_to_remaining_features() {
        // Only feature 2 varies; with one feature per node the sampled one is
        // usually constant.
        let rows = (0..8).map(|i| vec![1.0, 1.0, i as f64]).collect();
        let targets = (0..8).map(|i| i as f64).collect();
        let data = DesignMatrix::anonymous(rows, targets).unwrap();
        let mut c = cfg(usize::MAX);
        c.feature_subsample_fraction = 0.3;
        for seed in 0..10 {
            let t = tree_fit(&data, &c, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            for i in 0..8 {
                assert_eq!(t.predict(&[1.0, 1.0, i as f64]).unwrap(), i as f64);
            }
        }
    }

    #[test]
    fn midpoint_stays_below_upper_value() {
        let lo = 1.0_f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let m = midpoint(lo, hi);
        assert!(lo <= m && m < hi);
    }
}
