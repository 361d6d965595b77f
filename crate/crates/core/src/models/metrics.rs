//! Validation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::mean;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    /// RMSE divided by the range of the true targets.
    pub nrmse: f64,
    pub r2: f64,
    /// `1 - nrmse`.
    pub accuracy: f64,
}

/// Grid that keeps `1 - nrmse` exact for large nRMSE values.
const NRMSE_GRID: f64 = 1099511627776.0; // 2^40

/// Picks a representable nRMSE for which `(1 - nrmse) + nrmse == 1` holds
/// exactly. Values up to 2 already satisfy it; larger ones are rounded to a
/// multiple of 2^-40, a relative change below 1e-12.
fn exact_complement(nrmse: f64) -> f64 {
    if nrmse <= 2.0 || nrmse >= 4096.0 {
        nrmse
    } else {
        (nrmse * NRMSE_GRID).round() / NRMSE_GRID
    }
}

pub fn evaluate(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics> {
    if y_true.is_empty() || y_true.len() != y_pred.len() {
        return Err(Error::Schema(format!(
            "evaluate needs equal non-zero lengths, got {} and {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.iter().chain(y_pred).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value passed to evaluate".into()));
    }
    let lo = y_true.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y_true.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Undefined("constant y_true: nRMSE and R² are undefined".into()));
    }
    let n = y_true.len() as f64;
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum();
    let y_bar = mean(y_true);
    let ss_tot: f64 = y_true.iter().map(|t| (t - y_bar).powi(2)).sum();
    let rmse = (ss_res / n).sqrt();
    let nrmse = exact_complement(rmse / (hi - lo));
    Ok(Metrics {
        rmse,
        nrmse,
        r2: 1.0 - ss_res / ss_tot,
        accuracy: 1.0 - nrmse,
    })
}
