use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::KpiCell;
use crate::kpi::{Kpi, KpiVector};
use crate::spatial::{ProxyTarget, TileId};

pub const DEFAULT_LAGS: [usize; 3] = [0, 1, 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub tile: TileId,
    pub window: usize,
    pub features: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
    pub zero_variance: bool,
}

impl ColumnStats {
    /// Mean and population standard deviation of `values`.
    pub fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let (sum, n) = values.clone().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        let mean = sum / n as f64;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        ColumnStats {
            mean,
            std,
            zero_variance: !(std > 1e-12 * mean.abs().max(1.0)),
        }
    }

    pub fn apply(&self, value: f64) -> f64 {
        if self.zero_variance {
            0.0
        } else {
            (value - self.mean) / self.std
        }
    }
}

/// Per-group column statistics. Groups are windows for per-window
/// standardization, or seasons when statistics are carried to later windows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Standardization {
    pub groups: BTreeMap<usize, Vec<ColumnStats>>,
}

impl Standardization {
    /// Statistics of every column over `rows`, grouped by `group_of`.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a PanelRow>, n_cols: usize, group_of: impl Fn(&PanelRow) -> usize) -> Result<Self> {
        let mut grouped: BTreeMap<usize, Vec<&PanelRow>> = BTreeMap::new();
        for r in rows {
            grouped.entry(group_of(r)).or_default().push(r);
        }
        let mut groups = BTreeMap::new();
        for (g, members) in grouped {
            if members.len() < 2 {
                return Err(Error::InsufficientData(format!(
                    "standardization group {g} has {} row(s); at least 2 required",
                    members.len()
                )));
            }
            let stats = (0..n_cols)
                .map(|c| ColumnStats::of(members.iter().map(move |r| r.features[c])))
                .collect();
            groups.insert(g, stats);
        }
        Ok(Standardization { groups })
    }

    pub fn apply_row(&self, group: usize, features: &[f64]) -> Result<Vec<f64>> {
        let stats = self
            .groups
            .get(&group)
            .ok_or_else(|| Error::InsufficientData(format!("no standardization statistics for group {group}")))?;
        Ok(features.iter().zip(stats).map(|(&v, s)| s.apply(v)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePanel {
    pub lags: Vec<usize>,
    pub columns: Vec<String>,
    pub rows: Vec<PanelRow>,
    /// Present once the feature columns have been standardized per window.
    pub standardization: Option<Standardization>,
}

impl FeaturePanel {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn windows(&self) -> BTreeSet<usize> {
        self.rows.iter().map(|r| r.window).collect()
    }

    pub fn tiles(&self) -> BTreeSet<TileId> {
        self.rows.iter().map(|r| r.tile).collect()
    }

    pub fn column_values(&self, col: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.features[col]).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    /// Same columns, rows filtered by `keep`.
    pub fn filter_rows(&self, keep: impl Fn(&PanelRow) -> bool) -> FeaturePanel {
        FeaturePanel {
            lags: self.lags.clone(),
            columns: self.columns.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
            standardization: self.standardization.clone(),
        }
    }
}

pub fn panel_columns(lags: &[usize]) -> Vec<String> {
    Kpi::ALL
        .iter()
        .flat_map(|k| lags.iter().map(move |&l| k.column(l)))
        .collect()
}

/// Collapses bands with weights, then pairs each (tile, t) with KPIs at
/// `t - k` for every lag `k` and the proxy at `t`.
///
/// Rows whose antecedent windows or proxy are missing are skipped. Columns are
/// KPI-major: `traffic_volume_lag0, traffic_volume_lag1, ...`.
pub fn build_panel(kpis: &[KpiCell], proxy: &[ProxyTarget], lags: &[usize]) -> Result<FeaturePanel> {
    if lags.is_empty() || lags.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("lags must be non-empty and strictly increasing".into()));
    }
    let max_lag = *lags.last().expect("non-empty");

    let mut collapsed: BTreeMap<(TileId, usize), ([f64; 7], f64)> = BTreeMap::new();
    for cell in kpis {
        if !(cell.weight > 0.0) {
            return Err(Error::Schema(format!("KPI cell weight must be > 0, got {}", cell.weight)));
        }
        let entry = collapsed.entry((cell.tile, cell.window)).or_insert(([0.0; 7], 0.0));
        for (acc, v) in entry.0.iter_mut().zip(cell.kpis.to_array()) {
            *acc += cell.weight * v;
        }
        entry.1 += cell.weight;
    }
    let table: BTreeMap<(TileId, usize), KpiVector> = collapsed
        .into_iter()
        .map(|(k, (sum, w))| (k, KpiVector::from_array(sum.map(|s| s / w))))
        .collect();

    let n_windows = table.keys().map(|k| k.1).collect::<BTreeSet<_>>().len();
    if n_windows < max_lag + 2 {
        return Err(Error::InsufficientData(format!(
            "{n_windows} window(s) available; lag {max_lag} needs at least {}",
            max_lag + 2
        )));
    }

    let targets: BTreeMap<(TileId, usize), f64> = proxy
        .iter()
        .map(|p| ((p.tile, p.window), p.deployed_bw_mhz))
        .collect();

    let mut rows = Vec::new();
    for &(tile, t) in table.keys() {
        if t < max_lag {
            continue;
        }
        let Some(&target) = targets.get(&(tile, t)) else {
            continue;
        };
        let lagged: Option<Vec<&KpiVector>> = lags.iter().map(|&k| table.get(&(tile, t - k))).collect();
        let Some(lagged) = lagged else {
            continue;
        };
        let features = Kpi::ALL
            .iter()
            .flat_map(|&kpi| lagged.iter().map(move |v| v.get(kpi)))
            .collect();
        rows.push(PanelRow {
            tile,
            window: t,
            features,
            target,
        });
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("no (tile, window) has a complete lag history and proxy".into()));
    }
    Ok(FeaturePanel {
        lags: lags.to_vec(),
        columns: panel_columns(lags),
        rows,
        standardization: None,
    })
}

/// Z-scores every feature column within each window (population standard
/// deviation). Targets are untouched. Columns with no spread in a window are
/// set to 0 and flagged.
pub fn standardize_per_window(panel: &FeaturePanel) -> Result<FeaturePanel> {
    let stats = Standardization::fit(&panel.rows, panel.columns.len(), |r| r.window)?;
    let rows = panel
        .rows
        .iter()
        .map(|r| {
            Ok(PanelRow {
                features: stats.apply_row(r.window, &r.features)?,
                ..r.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeaturePanel {
        lags: panel.lags.clone(),
        columns: panel.columns.clone(),
        rows,
        standardization: Some(stats),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kcell(tile: TileId, window: usize, base: f64, weight: f64) -> KpiCell {
        KpiCell {
            tile,
            band: "B4".into(),
            window,
            kpis: KpiVector::from_array([base, base + 0.1, base + 0.2, base + 0.3, base + 0.4, base + 0.5, base + 0.6]),
            weight,
            imputed: false,
        }
    }

    fn proxy(tile: TileId, window: usize, v: f64) -> ProxyTarget {
        ProxyTarget {
            tile,
            window,
            deployed_bw_mhz: v,
        }
    }

    fn fixture(n_windows: usize, n_tiles: usize) -> (Vec<KpiCell>, Vec<ProxyTarget>) {
        let mut cells = Vec::new();
        let mut targets = Vec::new();
        for t in 0..n_tiles {
            let tile = TileId::new(t, 0);
            for w in 0..n_windows {
                cells.push(kcell(tile, w, (10 * t + w) as f64, 1.0));
                targets.push(proxy(tile, w, 100.0 + w as f64));
            }
        }
        (cells, targets)
    }

    #[test]
    fn identity_lag_is_the_joined_table() {
        let (cells, targets) = fixture(3, 2);
        let p = build_panel(&cells, &targets, &[0]).unwrap();
        assert_eq!(p.rows.len(), 6);
        assert_eq!(p.columns.len(), 7);
        for r in &p.rows {
            let base = (10 * r.tile.row + r.window) as f64;
            assert_eq!(r.features[0], base);
            assert_eq!(r.target, 100.0 + r.window as f64);
        }
    }

    #[test]
    fn boundary_trimming() {
        let (cells, targets) = fixture(8, 3);
        let p = build_panel(&cells, &targets, &DEFAULT_LAGS).unwrap();
        assert_eq!(p.columns.len(), 21);
        for tile in p.tiles() {
            assert_eq!(p.rows.iter().filter(|r| r.tile == tile).count(), 6);
        }
    }

    #[test]
    fn lag_values_copied_cell_by_cell() {
        let tile = TileId::new(0, 0);
        let cells = vec![kcell(tile, 0, 1.0, 1.0), kcell(tile, 1, 2.0, 1.0), kcell(tile, 2, 3.0, 1.0)];
        let targets = vec![proxy(tile, 2, 50.0)];
        let p = build_panel(&cells, &targets, &[0, 1]).unwrap();
        assert_eq!(p.rows.len(), 1);
        let r = &p.rows[0];
        assert_eq!(r.window, 2);
        let lag0 = cells[2].kpis.to_array();
        let lag1 = cells[1].kpis.to_array();
        for (k, kpi) in Kpi::ALL.iter().enumerate() {
            assert_eq!(r.features[p.column_index(&kpi.column(0)).unwrap()], lag0[k]);
            assert_eq!(r.features[p.column_index(&kpi.column(1)).unwrap()], lag1[k]);
        }
        assert_eq!(r.target, 50.0);
    }

    #[test]
    fn bands_collapse_by_weight() {
        let tile = TileId::new(0, 0);
        let mut cells = Vec::new();
        for w in 0..2 {
            cells.push(kcell(tile, w, 10.0, 3.0));
            let mut other = kcell(tile, w, 20.0, 1.0);
            other.band = "n78".into();
            cells.push(other);
        }
        let targets = vec![proxy(tile, 0, 1.0), proxy(tile, 1, 1.0)];
        let p = build_panel(&cells, &targets, &[0]).unwrap();
        assert_eq!(p.rows[0].features[0], 12.5);
    }

    #[test]
    fn too_few_windows() {
        let (cells, targets) = fixture(3, 2);
        assert!(matches!(build_panel(&cells, &targets, &DEFAULT_LAGS), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn unsorted_lags_rejected() {
        let (cells, targets) = fixture(5, 2);
        assert!(build_panel(&cells, &targets, &[1, 0]).is_err());
        assert!(build_panel(&cells, &targets, &[]).is_err());
    }

    fn panel_of(columns: Vec<Vec<f64>>, window: usize) -> FeaturePanel {
        let n = columns[0].len();
        FeaturePanel {
            lags: vec![0],
            columns: (0..columns.len()).map(|i| format!("c{i}")).collect(),
            rows: (0..n)
                .map(|i| PanelRow {
                    tile: TileId::new(i, 0),
                    window,
                    features: columns.iter().map(|c| c[i]).collect(),
                    target: i as f64,
                })
                .collect(),
            standardization: None,
        }
    }

    #[test]
    fn two_point_standardization() {
        let p = standardize_per_window(&panel_of(vec![vec![2.0, 4.0]], 0)).unwrap();
        assert_eq!(p.column_values(0), vec![-1.0, 1.0]);
        assert_eq!(p.targets(), vec![0.0, 1.0]);
    }

    #[test]
    fn constant_column_is_zeroed_and_flagged() {
        let p = standardize_per_window(&panel_of(vec![vec![5.0, 5.0, 5.0]], 3)).unwrap();
        assert_eq!(p.column_values(0), vec![0.0, 0.0, 0.0]);
        assert!(p.standardization.unwrap().groups[&3][0].zero_variance);
    }

    #[test]
    fn standardization_is_idempotent() {
        let p = panel_of(vec![vec![1.0, 7.0, 2.5, -3.0], vec![0.1, 0.2, 0.4, 0.8]], 0);
        let once = standardize_per_window(&p).unwrap();
        let twice = standardize_per_window(&once).unwrap();
        for (a, b) in once.rows.iter().zip(&twice.rows) {
            for (x, y) in a.features.iter().zip(&b.features) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn single_row_window_is_an_error() {
        assert!(standardize_per_window(&panel_of(vec![vec![1.0]], 0)).is_err());
    }
}
