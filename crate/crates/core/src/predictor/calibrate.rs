use serde::{Deserialize, Serialize};

use super::CiLevel;

/// Symmetric interval half-widths in minutes, one per confidence level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualQuantiles {
    pub l68: f64,
    pub l95: f64,
    pub l99: f64,
}

impl ResidualQuantiles {
    pub fn half_width(&self, level: CiLevel) -> f64 {
        match level {
            CiLevel::L68 => self.l68,
            CiLevel::L95 => self.l95,
            CiLevel::L99 => self.l99,
        }
    }

    pub fn max(self, other: ResidualQuantiles) -> ResidualQuantiles {
        ResidualQuantiles {
            l68: self.l68.max(other.l68),
            l95: self.l95.max(other.l95),
            l99: self.l99.max(other.l99),
        }
    }

    /// `(1 - t) * self + t * other`, level by level.
    pub fn lerp(self, other: ResidualQuantiles, t: f64) -> ResidualQuantiles {
        let f = |a: f64, b: f64| a + (b - a) * t;
        ResidualQuantiles {
            l68: f(self.l68, other.l68),
            l95: f(self.l95, other.l95),
            l99: f(self.l99, other.l99),
        }
    }
}

/// Nearest-rank percentile of an already sorted slice: the smallest value
/// with at least `percent`% of the sample at or below it.
pub fn nearest_rank_percentile(sorted: &[f64], percent: u32) -> f64 {
    let n = sorted.len();
    let rank = (percent as usize * n).div_ceil(100).max(1);
    sorted[rank.min(n) - 1]
}

/// Half-width at level L is the L-th percentile of `|residual|`.
/// Returns `None` when fewer than `min_residuals` are available.
pub fn calibrate_intervals(residuals: &[f64], min_residuals: usize) -> Option<ResidualQuantiles> {
    if residuals.is_empty() || residuals.len() < min_residuals {
        return None;
    }
    let mut abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    Some(ResidualQuantiles {
        l68: nearest_rank_percentile(&abs, 68),
        l95: nearest_rank_percentile(&abs, 95),
        l99: nearest_rank_percentile(&abs, 99),
    })
}
