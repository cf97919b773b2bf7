//! Efficiency metrics: frame error rate, entropy loss, sweep-point
//! aggregation, and the rank correlation used by trend checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::ReconciliationReport;

/// Entropy loss `Z = i / log2(2L + 1)`: the information carried by `i`
/// exchanged output bits, measured in `(2L+1)`-ary symbols.
///
/// Requires `half_width >= 1`.
pub fn entropy_loss(iterations: u64, half_width: i32) -> f64 {
    assert!(half_width >= 1, "half_width must be >= 1");
    iterations as f64 / (2.0 * f64::from(half_width) + 1.0).log2()
}

/// Frame error rate: the fraction of frames discarded.
pub fn frame_error_rate(failed: u64, total: u64) -> Result<f64> {
    if total == 0 {
        return Err(Error::InvalidParameter(
            "frame_error_rate needs total >= 1".into(),
        ));
    }
    if failed > total {
        return Err(Error::InvalidParameter(format!(
            "failed count {failed} exceeds total {total}"
        )));
    }
    Ok(failed as f64 / total as f64)
}

/// Aggregated outcome of all trials at one sweep grid value.
///
/// Means run over *all* trials: a failed frame contributes its capped
/// iteration count, so the leakage estimate is never understated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// The grid value this row belongs to (a QBER or a half-width).
    pub independent_value: f64,
    /// Number of trials aggregated.
    pub trials: u64,
    /// Fraction of trials that failed to reconcile.
    pub fer: f64,
    /// Mean total iterations per trial.
    pub mean_iterations: f64,
    /// Mean rounds per trial.
    pub mean_rounds: f64,
    /// Mean entropy loss per trial, in `(2L+1)`-ary symbols.
    pub mean_entropy_loss: f64,
    /// Population standard deviation of total iterations.
    pub std_iterations: f64,
}

/// Folds per-trial reports into one [`SweepPoint`].
///
/// All statistics are computed from integer sums, so the result is
/// exactly independent of report order and of how trials were
/// distributed over threads. `half_width` is the `L` shared by every
/// report in the batch; it converts the summed iteration count into
/// the mean entropy loss without accumulating floating-point error.
pub fn aggregate(
    reports: &[ReconciliationReport],
    independent_value: f64,
    half_width: i32,
) -> Result<SweepPoint> {
    if reports.is_empty() {
        return Err(Error::InvalidParameter(
            "aggregate needs at least one report".into(),
        ));
    }
    let trials = reports.len() as u64;
    let mut failed: u64 = 0;
    let mut iteration_sum: u64 = 0;
    let mut iteration_sq_sum: u128 = 0;
    let mut round_sum: u64 = 0;
    for report in reports {
        if !report.success {
            failed += 1;
        }
        iteration_sum += report.total_iterations;
        iteration_sq_sum +=
            u128::from(report.total_iterations) * u128::from(report.total_iterations);
        round_sum += report.rounds;
    }
    let n = trials as f64;
    let mean_iterations = iteration_sum as f64 / n;
    let mean_square = iteration_sq_sum as f64 / n;
    let variance = (mean_square - mean_iterations * mean_iterations).max(0.0);
    Ok(SweepPoint {
        independent_value,
        trials,
        fer: frame_error_rate(failed, trials)?,
        mean_iterations,
        mean_rounds: round_sum as f64 / n,
        mean_entropy_loss: entropy_loss(iteration_sum, half_width) / n,
        std_iterations: variance.sqrt(),
    })
}

/// Spearman rank correlation with average ranks for ties.
///
/// Errors when the slices differ in length, hold fewer than two
/// points, contain NaN, or are constant (the correlation is undefined).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParameter(format!(
            "spearman needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidParameter(
            "spearman needs at least two points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter(
            "spearman input contains NaN".into(),
        ));
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0; // ranks always average to (n+1)/2
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..xs.len() {
        let dx = rx[i] - mean;
        let dy = ry[i] - mean;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::InvalidParameter(
            "spearman is undefined for a constant sequence".into(),
        ));
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// 1-based ranks with ties assigned the average of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .expect("NaN rejected above")
    });
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Average of the 1-based ranks i+1 ..= j+1.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for slot in &order[i..=j] {
            out[*slot] = rank;
        }
        i = j + 1;
    }
    out
}
