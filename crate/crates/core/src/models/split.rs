//! Train/test partitioning by window with train-only standardization.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::features::{ColumnStats, FeaturePanel, PanelRow, Standardization};
use crate::spatial::TileId;

/// Standardized design matrix with its row keys.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSet {
    pub keys: Vec<(TileId, usize)>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl DesignSet {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn windows(&self) -> BTreeSet<usize> {
        self.keys.iter().map(|k| k.1).collect()
    }

    /// Same rows with one extra column appended.
    pub fn with_column(&self, values: &[f64]) -> DesignSet {
        let (n, p) = self.x.shape();
        let x = DMatrix::from_fn(n, p + 1, |i, j| if j < p { self.x[(i, j)] } else { values[i] });
        DesignSet {
            keys: self.keys.clone(),
            x,
            y: self.y.clone(),
        }
    }

    fn build(rows: &[&PanelRow], n_cols: usize, scale: impl Fn(&PanelRow) -> Result<Vec<f64>>) -> Result<Self> {
        let mut x = DMatrix::zeros(rows.len(), n_cols);
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in scale(r)?.into_iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        Ok(DesignSet {
            keys: rows.iter().map(|r| (r.tile, r.window)).collect(),
            x,
            y: rows.iter().map(|r| r.target).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSplit {
    pub columns: Vec<String>,
    pub train: DesignSet,
    pub test: DesignSet,
    /// Per-window statistics of the train rows.
    pub train_stats: Standardization,
    /// Per-window train statistics averaged by season (`window %
    /// season_period`), used to scale test rows.
    pub test_stats: Standardization,
    pub season_period: usize,
}

/// Partitions `panel` by window. Train rows are standardized within their own
/// window. Test rows use the per-window train statistics of the same season,
/// averaged (means directly, spreads as root mean variance), so no test value
/// informs any scaling.
pub fn temporal_split(
    panel: &FeaturePanel,
    train_windows: &[usize],
    test_windows: &[usize],
    season_period: usize,
) -> Result<TemporalSplit> {
    if panel.standardization.is_some() {
        return Err(Error::Schema("temporal_split expects an unstandardized panel".into()));
    }
    if season_period == 0 {
        return Err(Error::Config("season period must be >= 1".into()));
    }
    let train_set: BTreeSet<usize> = train_windows.iter().copied().collect();
    let test_set: BTreeSet<usize> = test_windows.iter().copied().collect();
    if let Some(w) = train_set.intersection(&test_set).next() {
        return Err(Error::Leakage(format!("window {w} is in both train and test sets")));
    }
    if let (Some(&last_train), Some(&first_test)) = (train_set.last(), test_set.first()) {
        if first_test <= last_train {
            return Err(Error::Leakage(format!(
                "test window {first_test} is not after train window {last_train}"
            )));
        }
    }
    let train_rows: Vec<&PanelRow> = panel.rows.iter().filter(|r| train_set.contains(&r.window)).collect();
    let test_rows: Vec<&PanelRow> = panel.rows.iter().filter(|r| test_set.contains(&r.window)).collect();
    if train_rows.is_empty() || test_rows.is_empty() {
        return Err(Error::InsufficientData(format!(
            "split has {} train and {} test rows",
            train_rows.len(),
            test_rows.len()
        )));
    }
    let n_cols = panel.columns.len();
    let train_stats = Standardization::fit(train_rows.iter().copied(), n_cols, |r| r.window)?;
    let test_stats = season_average(&train_stats, season_period);
    for r in &test_rows {
        let season = r.window % season_period;
        if !test_stats.groups.contains_key(&season) {
            return Err(Error::InsufficientData(format!(
                "no train window shares season {season} with test window {}",
                r.window
            )));
        }
    }
    let train = DesignSet::build(&train_rows, n_cols, |r| train_stats.apply_row(r.window, &r.features))?;
    let test = DesignSet::build(&test_rows, n_cols, |r| {
        test_stats.apply_row(r.window % season_period, &r.features)
    })?;
    Ok(TemporalSplit {
        columns: panel.columns.clone(),
        train,
        test,
        train_stats,
        test_stats,
        season_period,
    })
}

/// Averages per-window statistics over windows sharing a season.
pub fn season_average(per_window: &Standardization, season_period: usize) -> Standardization {
    let mut by_season: BTreeMap<usize, Vec<&Vec<ColumnStats>>> = BTreeMap::new();
    for (&w, stats) in &per_window.groups {
        by_season.entry(w % season_period).or_default().push(stats);
    }
    let groups = by_season
        .into_iter()
        .map(|(season, members)| {
            let k = members.len() as f64;
            let n_cols = members[0].len();
            let stats = (0..n_cols)
                .map(|c| {
                    let mean = members.iter().map(|m| m[c].mean).sum::<f64>() / k;
                    let std = (members.iter().map(|m| m[c].std * m[c].std).sum::<f64>() / k).sqrt();
                    ColumnStats {
                        mean,
                        std,
                        zero_variance: !(std > 1e-12 * mean.abs().max(1.0)),
                    }
                })
                .collect();
            (season, stats)
        })
        .collect();
    Standardization { groups }
}

/// The last `test_count` windows of the panel for testing, the rest for
/// training.
pub fn trailing_split_windows(panel: &FeaturePanel, test_count: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let windows: Vec<usize> = panel.windows().into_iter().collect();
    if test_count == 0 || windows.len() <= test_count {
        return Err(Error::InsufficientData(format!(
            "cannot hold out {test_count} of {} windows",
            windows.len()
        )));
    }
    let cut = windows.len() - test_count;
    Ok((windows[..cut].to_vec(), windows[cut..].to_vec()))
}
