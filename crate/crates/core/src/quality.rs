//! Gap imputation and outlier treatment for per-tile window series.
//!
//! Quantiles and percentiles use linear interpolation between order
//! statistics: for sorted values `x[0..n]` and probability `p`, the position
//! is `h = (n - 1) p` and the result `x[floor h] + (h - floor h)(x[floor h + 1]
//! - x[floor h])`. Outlier fences depend on this convention.

use serde::{Deserialize, Serialize};

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{compute_kpis, KpiCell};
use crate::kpi::{Kpi, KpiVector};
use crate::spatial::{CellAggregate, TileId};

/// Cap on detect/winsorize rounds in [`cleanse`].
pub const MAX_CLEANSE_ROUNDS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesKey {
    pub tile: TileId,
    pub band: String,
    pub field: String,
}

impl std::fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.tile, self.band, self.field)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesView {
    pub key: SeriesKey,
    /// Strictly increasing window indices.
    pub windows: Vec<usize>,
    pub values: Vec<Option<f64>>,
}

impl SeriesView {
    pub fn new(key: SeriesKey, windows: Vec<usize>, values: Vec<Option<f64>>) -> Result<Self> {
        if windows.len() != values.len() {
            return Err(Error::Schema("series windows and values differ in length".into()));
        }
        if windows.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Schema(format!("series {key}: windows must be strictly increasing")));
        }
        Ok(SeriesView { key, windows, values })
    }

    /// A series over consecutive windows starting at 0.
    pub fn dense(key: SeriesKey, values: Vec<Option<f64>>) -> Self {
        SeriesView {
            key,
            windows: (0..values.len()).collect(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// Values of a complete series.
    pub fn complete_values(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .map(|v| v.ok_or_else(|| Error::InsufficientData(format!("series {} has gaps", self.key))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleansePolicy {
    pub max_short_gap: usize,
    pub ma_window: usize,
    pub iqr_k: f64,
    pub z_thresh: f64,
    /// Percent limits for winsorization.
    pub winsor_limits: (f64, f64),
}

impl Default for CleansePolicy {
    fn default() -> Self {
        CleansePolicy {
            max_short_gap: 1,
            ma_window: 3,
            iqr_k: 1.5,
            z_thresh: 3.0,
            winsor_limits: (5.0, 95.0),
        }
    }
}

impl CleansePolicy {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.winsor_limits;
        if self.max_short_gap == 0 || self.ma_window == 0 || !(self.iqr_k > 0.0) || !(self.z_thresh > 0.0) {
            return Err(Error::Config("cleanse policy parameters must be > 0".into()));
        }
        if !(lo > 0.0) || !(lo < hi) || hi > 100.0 {
            return Err(Error::Config(format!(
                "winsor limits must satisfy 0 < lower < upper <= 100, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Percentile (in percent) of already sorted values.
pub fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    // (n - 1) * pct / 100 keeps decimal fixtures exact, e.g. 3 * 95 / 100 = 2.85.
    let h = ((n - 1) as f64 * pct / 100.0).clamp(0.0, (n - 1) as f64);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n || frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Fills gaps.
///
/// Runs of at most `max_short_gap` missing values are linearly interpolated
/// between their neighbours, or forward/backward filled at the series edges.
/// Longer runs take, per position, the mean of the nearest `ma_window / 2`
/// present values on each side (at least one per side), i.e. a centred
/// moving average over present values.
pub fn interpolate_gaps(series: &SeriesView, policy: &CleansePolicy) -> Result<SeriesView> {
    let present: Vec<usize> = (0..series.len()).filter(|&i| series.values[i].is_some()).collect();
    if present.is_empty() {
        return Err(Error::InsufficientData(format!("series {} has no present values", series.key)));
    }
    let value = |i: usize| series.values[i].expect("present index");
    let half = (policy.ma_window / 2).max(1);
    let mut out = series.values.clone();

    let mut i = 0;
    while i < series.len() {
        if series.values[i].is_some() {
            i += 1;
            continue;
        }
        let start = i;
        while i < series.len() && series.values[i].is_none() {
            i += 1;
        }
        let end = i; // exclusive
        let left = start.checked_sub(1);
        let right = (end < series.len()).then_some(end);
        let run = end - start;

        if run <= policy.max_short_gap {
            for (offset, slot) in out[start..end].iter_mut().enumerate() {
                *slot = Some(match (left, right) {
                    (Some(l), Some(r)) => {
                        let (a, b) = (value(l), value(r));
                        let t = (start + offset - l) as f64 / (r - l) as f64;
                        a + t * (b - a)
                    }
                    (Some(l), None) => value(l),
                    (None, Some(r)) => value(r),
                    (None, None) => unreachable!("at least one present value"),
                });
            }
        } else {
            let split = present.partition_point(|&p| p < start);
            let before = &present[split.saturating_sub(half)..split];
            let after = &present[split..(split + half).min(present.len())];
            let picked: Vec<f64> = before.iter().chain(after).map(|&p| value(p)).collect();
            let mean = picked.iter().sum::<f64>() / picked.len() as f64;
            for slot in &mut out[start..end] {
                *slot = Some(mean);
            }
        }
    }
    Ok(SeriesView {
        key: series.key.clone(),
        windows: series.windows.clone(),
        values: out,
    })
}

/// Flags values outside `[Q1 - k IQR, Q3 + k IQR]` or with `|z| > z_thresh`
/// (sample standard deviation). Either test firing flags the value.
pub fn detect_outliers(series: &SeriesView, policy: &CleansePolicy) -> Result<Vec<bool>> {
    let values = series.complete_values()?;
    let n = values.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let sorted = sorted_copy(&values);
    let q1 = percentile_sorted(&sorted, 25.0);
    let q3 = percentile_sorted(&sorted, 75.0);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - policy.iqr_k * iqr, q3 + policy.iqr_k * iqr);

    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(values
        .iter()
        .map(|&v| {
            let fenced = v < lo || v > hi;
            let z = sd > 0.0 && ((v - mean) / sd).abs() > policy.z_thresh;
            fenced || z
        })
        .collect())
}

/// Clamps flagged values into the `winsor_limits` percentiles of the
/// unflagged values.
pub fn winsorize(series: &SeriesView, mask: &[bool], policy: &CleansePolicy) -> Result<SeriesView> {
    if mask.len() != series.len() {
        return Err(Error::Schema("outlier mask is not aligned with the series".into()));
    }
    let values = series.complete_values()?;
    if !mask.iter().any(|&m| m) {
        return Ok(series.clone());
    }
    let kept: Vec<f64> = values.iter().zip(mask).filter(|(_, &m)| !m).map(|(&v, _)| v).collect();
    if kept.is_empty() {
        return Err(Error::InsufficientData(format!(
            "series {}: every value was flagged as an outlier",
            series.key
        )));
    }
    let sorted = sorted_copy(&kept);
    let lo = percentile_sorted(&sorted, policy.winsor_limits.0);
    let hi = percentile_sorted(&sorted, policy.winsor_limits.1);
    let values = values
        .iter()
        .zip(mask)
        .map(|(&v, &m)| Some(if m { v.clamp(lo, hi) } else { v }))
        .collect();
    Ok(SeriesView {
        key: series.key.clone(),
        windows: series.windows.clone(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleanseAction {
    Interpolated,
    Winsorized,
}

/// One audit line for `cleansing_log.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanseLogEntry {
    pub key: SeriesKey,
    pub window: usize,
    pub action: CleanseAction,
    pub before: Option<f64>,
    pub after: f64,
}

/// Full pipeline for one series: gap filling, then detect/winsorize rounds
/// until no value is flagged. The fixed point makes the pipeline idempotent.
pub fn cleanse(series: &SeriesView, policy: &CleansePolicy) -> Result<(SeriesView, Vec<CleanseLogEntry>)> {
    let mut log = Vec::new();
    let filled = interpolate_gaps(series, policy)?;
    for (i, (before, after)) in series.values.iter().zip(&filled.values).enumerate() {
        if before.is_none() {
            log.push(CleanseLogEntry {
                key: series.key.clone(),
                window: series.windows[i],
                action: CleanseAction::Interpolated,
                before: None,
                after: after.expect("filled"),
            });
        }
    }
    let original = filled.complete_values()?;
    let mut current = filled;
    for _ in 0..MAX_CLEANSE_ROUNDS {
        let mask = detect_outliers(&current, policy)?;
        if !mask.iter().any(|&m| m) {
            for (i, (&before, after)) in original.iter().zip(&current.values).enumerate() {
                let after = after.expect("complete");
                if before.to_bits() != after.to_bits() {
                    log.push(CleanseLogEntry {
                        key: series.key.clone(),
                        window: series.windows[i],
                        action: CleanseAction::Winsorized,
                        before: Some(before),
                        after,
                    });
                }
            }
            log.sort_by_key(|e| e.window);
            return Ok((current, log));
        }
        current = winsorize(&current, &mask, policy)?;
    }
    Err(Error::Numeric(format!(
        "series {}: outlier treatment did not settle within {MAX_CLEANSE_ROUNDS} rounds",
        series.key
    )))
}

/// KPIs of an observed cell and its sample count.
type ObservedCell = (KpiVector, u64);

/// Computes KPIs for every aggregated cell and cleanses each
/// `(tile, band, kpi)` series over windows `0..n_windows`.
///
/// Windows without a cell are imputed and get band-collapse weight 1; observed
/// cells are weighted by their sample count. Output is sorted by tile, band,
/// window; the log by tile, band, KPI, then window.
pub fn cleanse_cells(
    cells: &[CellAggregate],
    n_windows: usize,
    policy: &CleansePolicy,
) -> Result<(Vec<KpiCell>, Vec<CleanseLogEntry>)> {
    policy.validate()?;
    let mut grouped: BTreeMap<(TileId, String), Vec<Option<ObservedCell>>> = BTreeMap::new();
    for cell in cells {
        if cell.window >= n_windows {
            return Err(Error::Schema(format!("cell window {} outside 0..{n_windows}", cell.window)));
        }
        let slots = grouped
            .entry((cell.tile, cell.band.clone()))
            .or_insert_with(|| vec![None; n_windows]);
        if slots[cell.window].is_some() {
            return Err(Error::Schema(format!(
                "duplicate cell for tile ({}, {}) band {} window {}",
                cell.tile.row, cell.tile.col, cell.band, cell.window
            )));
        }
        slots[cell.window] = Some((compute_kpis(cell), cell.sample_count));
    }

    let groups: Vec<_> = grouped.into_iter().collect();
    let results = groups
        .par_iter()
        .map(|((tile, band), slots)| {
            let mut columns = Vec::with_capacity(Kpi::ALL.len());
            let mut log = Vec::new();
            for kpi in Kpi::ALL {
                let key = SeriesKey {
                    tile: *tile,
                    band: band.clone(),
                    field: kpi.name().to_string(),
                };
                let values = slots.iter().map(|s| s.map(|(v, _)| v.get(kpi))).collect();
                let (clean, entries) = cleanse(&SeriesView::dense(key, values), policy)?;
                columns.push(clean.complete_values()?);
                log.extend(entries);
            }
            let out: Vec<KpiCell> = (0..n_windows)
                .map(|w| {
                    let mut arr = [0.0; 7];
                    for (k, col) in columns.iter().enumerate() {
                        arr[k] = col[w];
                    }
                    let (weight, imputed) = match slots[w] {
                        Some((_, n)) => (n as f64, false),
                        None => (1.0, true),
                    };
                    KpiCell {
                        tile: *tile,
                        band: band.clone(),
                        window: w,
                        kpis: KpiVector::from_array(arr),
                        weight,
                        imputed,
                    }
                })
                .collect();
            Ok((out, log))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut kpis = Vec::new();
    let mut log = Vec::new();
    for (cells, entries) in results {
        kpis.extend(cells);
        log.extend(entries);
    }
    Ok((kpis, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> SeriesKey {
        SeriesKey {
            tile: TileId::new(0, 0),
            band: "B4".into(),
            field: "traffic_volume".into(),
        }
    }

    fn series(values: &[Option<f64>]) -> SeriesView {
        SeriesView::dense(key(), values.to_vec())
    }

    fn full(values: &[f64]) -> SeriesView {
        series(&values.iter().map(|&v| Some(v)).collect::<Vec<_>>())
    }

    fn filled(s: &SeriesView) -> Vec<f64> {
        s.complete_values().unwrap()
    }

    #[test]
    fn midpoint_interpolation() {
        let out = interpolate_gaps(&series(&[Some(10.0), None, Some(20.0)]), &CleansePolicy::default()).unwrap();
        assert_eq!(filled(&out), vec![10.0, 15.0, 20.0]);
    }

    #[test]
    fn backward_fill_at_leading_edge() {
        let out = interpolate_gaps(&series(&[None, Some(7.0), Some(7.0)]), &CleansePolicy::default()).unwrap();
        assert_eq!(filled(&out), vec![7.0, 7.0, 7.0]);
    }

    #[test]
    fn forward_fill_at_trailing_edge() {
        let out = interpolate_gaps(&series(&[Some(3.0), Some(5.0), None]), &CleansePolicy::default()).unwrap();
        assert_eq!(filled(&out), vec![3.0, 5.0, 5.0]);
    }

    #[test]
    fn long_gap_uses_moving_average_of_present_neighbours() {
        let out = interpolate_gaps(
            &series(&[Some(4.0), None, None, Some(10.0)]),
            &CleansePolicy::default(),
        )
        .unwrap();
        assert_eq!(filled(&out), vec![4.0, 7.0, 7.0, 10.0]);
    }

    #[test]
    fn long_gap_with_wider_window() {
        let policy = CleansePolicy {
            ma_window: 5,
            ..CleansePolicy::default()
        };
        let out = interpolate_gaps(
            &series(&[Some(1.0), Some(3.0), None, None, Some(5.0), Some(11.0)]),
            &policy,
        )
        .unwrap();
        // nearest two present values on each side: {1, 3} and {5, 11}
        assert_eq!(filled(&out), vec![1.0, 3.0, 5.0, 5.0, 5.0, 11.0]);
    }

    #[test]
    fn all_missing_is_an_error() {
        assert!(interpolate_gaps(&series(&[None, None]), &CleansePolicy::default()).is_err());
    }

    #[test]
    fn iqr_flags_only_the_spike() {
        let mask = detect_outliers(&full(&[1.0, 2.0, 3.0, 4.0, 100.0]), &CleansePolicy::default()).unwrap();
        assert_eq!(mask, vec![false, false, false, false, true]);
    }

    #[test]
    fn constant_and_symmetric_series_are_clean() {
        let p = CleansePolicy::default();
        assert!(detect_outliers(&full(&[5.0; 4]), &p).unwrap().iter().all(|m| !m));
        assert!(detect_outliers(&full(&[-1.0, 0.0, 1.0]), &p).unwrap().iter().all(|m| !m));
    }

    #[test]
    fn z_score_test_fires_independently() {
        // Wide IQR hides the spike from the fences; z-score catches it.
        let policy = CleansePolicy {
            iqr_k: 100.0,
            z_thresh: 2.0,
            ..CleansePolicy::default()
        };
        let mut v = vec![0.0; 9];
        v.extend([1.0; 9]);
        v.push(10.0);
        let mask = detect_outliers(&full(&v), &policy).unwrap();
        assert_eq!(mask.iter().filter(|&&m| m).count(), 1);
        assert!(mask[18]);
    }

    #[test]
    fn detect_requires_complete_series() {
        assert!(detect_outliers(&series(&[Some(1.0), None]), &CleansePolicy::default()).is_err());
    }

    #[test]
    fn winsorize_spike_to_95th_percentile() {
        let s = full(&[1.0, 2.0, 3.0, 4.0, 100.0]);
        let mask = [false, false, false, false, true];
        let out = winsorize(&s, &mask, &CleansePolicy::default()).unwrap();
        assert_eq!(filled(&out), vec![1.0, 2.0, 3.0, 4.0, 3.85]);
    }

    #[test]
    fn winsorize_with_empty_mask_is_identity() {
        let s = full(&[1.0, 2.0, 3.0]);
        let out = winsorize(&s, &[false; 3], &CleansePolicy::default()).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn winsorize_is_idempotent_for_a_fixed_mask() {
        let s = full(&[1.0, 2.0, 3.0, 4.0, 100.0, -50.0]);
        let mask = [false, false, false, false, true, true];
        let p = CleansePolicy::default();
        let once = winsorize(&s, &mask, &p).unwrap();
        let twice = winsorize(&once, &mask, &p).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn winsorize_all_flagged_is_an_error() {
        assert!(winsorize(&full(&[1.0, 2.0]), &[true, true], &CleansePolicy::default()).is_err());
    }

    #[test]
    fn cleanse_logs_every_change() {
        let s = series(&[Some(1.0), Some(2.0), None, Some(3.0), Some(4.0), Some(100.0)]);
        let (out, log) = cleanse(&s, &CleansePolicy::default()).unwrap();
        assert_eq!(out.len(), 6);
        assert!(log.iter().any(|e| e.window == 2 && e.action == CleanseAction::Interpolated));
        assert!(log.iter().any(|e| e.window == 5 && e.action == CleanseAction::Winsorized));
        let (again, log2) = cleanse(&out, &CleansePolicy::default()).unwrap();
        assert_eq!(again, out);
        assert!(log2.is_empty());
    }

    #[test]
    fn policy_validation() {
        assert!(CleansePolicy::default().validate().is_ok());
        let bad = CleansePolicy {
            winsor_limits: (95.0, 5.0),
            ..CleansePolicy::default()
        };
        assert!(bad.validate().is_err());
        let bad = CleansePolicy {
            ma_window: 0,
            ..CleansePolicy::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn unsorted_windows_rejected() {
        assert!(SeriesView::new(key(), vec![2, 1], vec![Some(1.0), Some(2.0)]).is_err());
    }
}
