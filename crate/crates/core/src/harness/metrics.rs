//! Per-run metrics.

use serde::Serialize;

use crate::control::angle_diff;
use crate::error::{Error, Result};
use crate::qlearn::WeightVector;

/// Tracking error is reported from this many periods on, once the filter
/// has locked on.
pub const TRACKING_SETTLE_PERIODS: f64 = 10.0;

/// Time average of `𝓔²` over each complete period.
///
/// Step `k` (time `k·dt`) belongs to period `⌊k·dt/T⌋`. Each period is
/// normalized by the time its steps actually cover, so a constant residual
/// `c` gives exactly `c²` even when `T` is not a multiple of `dt`. A partial
/// trailing period is dropped.
pub fn period_error(errors: &[f64], dt: f64, period: f64) -> Result<Vec<f64>> {
    let complete = (errors.len() as f64 * dt / period + 1e-9).floor() as usize;
    if complete == 0 {
        return Err(Error::TrajectoryTooShort { periods: errors.len() as f64 * dt / period, required: 1 });
    }
    let mut sums = vec![0.0; complete];
    let mut counts = vec![0usize; complete];
    for (k, e) in errors.iter().enumerate() {
        let j = (k as f64 * dt / period + 1e-9).floor() as usize;
        if j >= complete {
            break;
        }
        sums[j] += e * e * dt;
        counts[j] += 1;
    }
    Ok(sums.iter().zip(&counts).map(|(s, &n)| s / (n as f64 * dt)).collect())
}

/// Root-mean-square of wrapped angle differences.
pub fn circular_rmse(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (a, b) in pairs {
        sum += angle_diff(a, b).powi(2);
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        (sum / n as f64).sqrt()
    }
}

/// `|w⁽⁵⁾| > 3·max(|w⁽⁶⁾|, |w⁽⁷⁾|, |w⁽⁸⁾|)`.
pub fn cos_term_dominates(w: &WeightVector) -> bool {
    let w = w.as_array();
    w[4].abs() > 3.0 * w[5].abs().max(w[6].abs()).max(w[7].abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub run: usize,
    pub seed: u64,
    pub period_errors: Vec<f64>,
    pub net_rotation: f64,
    /// Circular RMSE of `θ̂` against the true phase after the settle time.
    pub tracking_rmse: f64,
    pub final_weights: WeightVector,
    pub degenerate_steps: usize,
    pub wall_clock_secs: f64,
}
