use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{pearson, FeaturePanel};
use crate::kpi::{parse_column, Kpi};
use crate::spatial::TileId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub kpi: Kpi,
    pub lag: usize,
    pub pearson: f64,
    pub n: usize,
}

/// Tile-level agreement between a KPI and the proxy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentEntry {
    pub kpi: Kpi,
    pub pearson: f64,
    pub n_tiles: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// One entry per (KPI, lag) in panel column order.
    pub entries: Vec<CorrelationEntry>,
    pub alignment: Vec<AlignmentEntry>,
}

impl CorrelationReport {
    pub fn get(&self, kpi: Kpi, lag: usize) -> Option<&CorrelationEntry> {
        self.entries.iter().find(|e| e.kpi == kpi && e.lag == lag)
    }

    /// Entries by descending |r|; ties keep column order.
    pub fn ranked(&self) -> Vec<CorrelationEntry> {
        let mut out = self.entries.clone();
        out.sort_by(|a, b| b.pearson.abs().total_cmp(&a.pearson.abs()));
        out
    }
}

/// Pearson of every `(KPI, lag)` column against the target, pooled over all
/// tiles and windows, plus the tile-level alignment check at lag 0 (per-tile
/// mean KPI against per-tile mean proxy).
pub fn correlation_report(panel: &FeaturePanel, lags: &[usize]) -> Result<CorrelationReport> {
    if panel.rows.is_empty() {
        return Err(Error::InsufficientData("correlation report needs a non-empty panel".into()));
    }
    let target = panel.targets();
    let mut entries = Vec::new();
    for (c, name) in panel.columns.iter().enumerate() {
        let Some((kpi, lag)) = parse_column(name) else {
            continue;
        };
        if !lags.contains(&lag) {
            continue;
        }
        entries.push(CorrelationEntry {
            kpi,
            lag,
            pearson: pearson(&panel.column_values(c), &target)?,
            n: target.len(),
        });
    }

    let mut alignment = Vec::new();
    let tiles = panel.tiles();
    if tiles.len() >= 2 {
        let mut per_tile: BTreeMap<TileId, (Vec<f64>, f64, usize)> = BTreeMap::new();
        for r in &panel.rows {
            let e = per_tile.entry(r.tile).or_insert_with(|| (vec![0.0; panel.columns.len()], 0.0, 0));
            for (acc, v) in e.0.iter_mut().zip(&r.features) {
                *acc += v;
            }
            e.1 += r.target;
            e.2 += 1;
        }
        let proxy_means: Vec<f64> = per_tile.values().map(|(_, t, n)| t / *n as f64).collect();
        for kpi in Kpi::ALL {
            let Some(c) = panel.column_index(&kpi.column(0)) else {
                continue;
            };
            let kpi_means: Vec<f64> = per_tile.values().map(|(s, _, n)| s[c] / *n as f64).collect();
            alignment.push(AlignmentEntry {
                kpi,
                pearson: pearson(&kpi_means, &proxy_means)?,
                n_tiles: kpi_means.len(),
            });
        }
    }
    Ok(CorrelationReport { entries, alignment })
}
