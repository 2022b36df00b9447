//! Independent reference computations used to check the library.
//!
//! Nothing here calls into the crate's fitting code.
#![allow(dead_code)]

use trainbot_core::analytics::DelayProfile;

/// Ridge weights and intercept via Gaussian elimination with partial pivoting
/// on `(XcᵀXc + λI) w = Xcᵀyc`, with `Xc`, `yc` mean-centred.
pub fn ridge_normal_equations(rows: &[Vec<f64>], targets: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let n = rows.len();
    let d = rows[0].len();
    let mean_x: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mean_y = targets.iter().sum::<f64>() / n as f64;

    // Augmented matrix [A | b].
    let mut aug = vec![vec![0.0; d + 1]; d];
    for a in 0..d {
        for b in 0..d {
            aug[a][b] = rows
                .iter()
                .map(|r| (r[a] - mean_x[a]) * (r[b] - mean_x[b]))
                .sum::<f64>();
        }
        aug[a][a] += lambda;
        aug[a][d] = rows
            .iter()
            .zip(targets)
            .map(|(r, y)| (r[a] - mean_x[a]) * (y - mean_y))
            .sum::<f64>();
    }
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        aug.swap(col, pivot);
        let p = aug[col][col];
        assert!(p.abs() > 1e-14, "oracle hit a singular system");
        for row in 0..d {
            if row != col {
                let factor = aug[row][col] / p;
                for k in col..=d {
                    aug[row][k] -= factor * aug[col][k];
                }
            }
        }
    }
    let w: Vec<f64> = (0..d).map(|i| aug[i][d] / aug[i][i]).collect();
    let intercept = mean_y - w.iter().zip(&mean_x).map(|(w, m)| w * m).sum::<f64>();
    (w, intercept)
}

fn variance_sum(ys: &[f64]) -> f64 {
    if ys.is_empty() {
        return 0.0;
    }
    let m = ys.iter().sum::<f64>() / ys.len() as f64;
    ys.iter().map(|y| (y - m) * (y - m)).sum()
}

/// Brute-force root split: every feature, every midpoint between sorted
/// distinct values, scored by weighted child variance. Ties resolve to the
/// lowest feature, then the lowest threshold.
pub fn exhaustive_root_split(
    rows: &[Vec<f64>],
    targets: &[f64],
    min_samples_leaf: usize,
) -> Option<(usize, f64)> {
    let n = rows.len();
    let d = rows[0].len();
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..d {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let mid = w[0] + (w[1] - w[0]) / 2.0;
            let thr = if mid >= w[1] { w[0] } else { mid };
            let left: Vec<f64> = (0..n).filter(|&i| rows[i][f] <= thr).map(|i| targets[i]).collect();
            let right: Vec<f64> = (0..n).filter(|&i| rows[i][f] > thr).map(|i| targets[i]).collect();
            if left.len() < min_samples_leaf || right.len() < min_samples_leaf {
                continue;
            }
            let score = (variance_sum(&left) + variance_sum(&right)) / n as f64;
            if best.is_none_or(|(_, _, s)| score < s) {
                best = Some((f, thr, score));
            }
        }
    }
    best.map(|(f, t, _)| (f, t))
}

/// RMSE and MAE written out longhand.
pub fn rmse_mae(predictions: &[f64], actuals: &[f64]) -> (f64, f64) {
    let n = actuals.len() as f64;
    let mut sq = Vec::new();
    let mut ab = Vec::new();
    for i in 0..actuals.len() {
        let e = actuals[i] - predictions[i];
        sq.push(e.powi(2));
        ab.push(e.abs());
    }
    ((sq.iter().sum::<f64>() / n).sqrt(), ab.iter().sum::<f64>() / n)
}

/// Nearest-rank empirical percentile: the smallest sample value `v[k-1]`
/// (1-based rank `k`) with `k / n >= percent / 100`, found by linear scan in
/// integer arithmetic.
pub fn nearest_rank_percentile(values: &[f64], percent: u32) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as u64;
    let k = (1..=n).find(|k| k * 100 >= percent as u64 * n).unwrap_or(n);
    v[k as usize - 1]
}

/// Pearson correlation computed from the textbook definition.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}

/// Ordinary least-squares coefficient of determination for `y ~ a + b x`.
pub fn linear_fit_r2(x: &[f64], y: &[f64]) -> f64 {
    let r = pearson(x, y).unwrap_or(0.0);
    r * r
}

/// Mean of `values` and the fraction strictly above `threshold`.
pub fn mean_and_exceedance(values: &[f64], threshold: f64) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let over = values.iter().filter(|&&v| v > threshold).count() as f64 / n;
    Some((mean, over))
}

/// Position of the first value strictly above `threshold`.
pub fn first_exceeding(values: &[f64], threshold: f64) -> Option<usize> {
    for (i, &v) in values.iter().enumerate() {
        if v > threshold {
            return Some(i);
        }
    }
    None
}

/// Position and size of the largest step-to-step increase, earliest on ties.
pub fn largest_increase(values: &[f64]) -> Option<(usize, f64)> {
    if values.len() < 2 {
        return None;
    }
    let best = (1..values.len()).map(|i| values[i] - values[i - 1]).fold(f64::NEG_INFINITY, f64::max);
    let earliest = (1..values.len()).find(|&i| values[i] - values[i - 1] == best)?;
    Some((earliest, best))
}

/// Change from position `at` to the last value, and its sign outside a dead
/// band: -1 mitigated, 1 worsened, 0 unchanged.
pub fn mitigation_outcome(values: &[f64], at: usize, band: f64) -> (i8, f64) {
    let change = values[values.len() - 1] - values[at];
    let sign = if change < -band {
        -1
    } else if change > band {
        1
    } else {
        0
    };
    (sign, change)
}

/// Scores every candidate pair by the textbook correlation over shared
/// stations taken in station-code order, then sorts.
pub fn ranked_similarity(profiles: &[DelayProfile], query: &str, k: usize) -> Vec<(String, f64)> {
    let q = profiles.iter().find(|p| p.train_number == query).unwrap();
    let mut scored = Vec::new();
    for p in profiles {
        let mut shared = Vec::new();
        for (i, s) in q.stations.iter().enumerate() {
            for (j, t) in p.stations.iter().enumerate() {
                if s == t {
                    if let (Some(x), Some(y)) = (q.mean_late_min[i], p.mean_late_min[j]) {
                        shared.push((s.clone(), x, y));
                    }
                }
            }
        }
        if shared.len() < 3 {
            continue;
        }
        shared.sort_by(|a, b| a.0.cmp(&b.0));
        let x: Vec<f64> = shared.iter().map(|s| s.1).collect();
        let y: Vec<f64> = shared.iter().map(|s| s.2).collect();
        if let Some(r) = pearson(&x, &y) {
            scored.push((p.train_number.clone(), r.clamp(-1.0, 1.0)));
        }
    }
    // Insertion sort on (score desc, number asc).
    let mut out: Vec<(String, f64)> = Vec::new();
    for item in scored {
        let pos = out
            .iter()
            .position(|o| item.1 > o.1 || (item.1 == o.1 && item.0 < o.0))
            .unwrap_or(out.len());
        out.insert(pos, item);
    }
    out.truncate(k);
    out
}

