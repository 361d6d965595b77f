//! Tile grid and quarterly window projection, and per-cell aggregation.
//!
//! Tiles are equirectangular degree squares anchored at the grid origin and
//! use half-open intervals `[edge, edge + size)`. Windows are calendar-month
//! spans starting every `stride_months` from the epoch.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike, Months, TimeZone, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::synthgen::{RawSample, RegulatoryRecord};

/// Relative slack, in tile units, under which a coordinate is snapped onto
/// the nearest tile edge. Absorbs decimal-to-binary rounding such as
/// `(45.01 - 45.0) / 0.01 = 0.99999999999980`.
const EDGE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub tile_size_deg: f64,
    pub n_rows: usize,
    pub n_cols: usize,
}

/// Grid tile address. Serialized as `r<row>c<col>`, e.g. `r3c12`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TileId {
    pub row: usize,
    pub col: usize,
}

impl TileId {
    pub fn new(row: usize, col: usize) -> Self {
        TileId { row, col }
    }
}

impl std::fmt::Display for TileId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "r{}c{}", self.row, self.col)
    }
}

impl std::str::FromStr for TileId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Schema(format!("malformed tile id `{s}`"));
        let (row, col) = s.strip_prefix('r').and_then(|t| t.split_once('c')).ok_or_else(bad)?;
        Ok(TileId::new(row.parse().map_err(|_| bad())?, col.parse().map_err(|_| bad())?))
    }
}

impl Serialize for TileId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TileId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

fn edge_index(offset: f64, size: f64) -> f64 {
    let q = offset / size;
    let nearest = q.round();
    if (q - nearest).abs() < EDGE_SNAP {
        nearest
    } else {
        q.floor()
    }
}

impl GridSpec {
    pub const DEFAULT_TILE_SIZE_DEG: f64 = 0.01;

    /// Smallest grid with the given tile size anchored at the bbox's
    /// south-west corner that covers the whole bbox.
    pub fn covering(bbox: crate::synthgen::BBox, tile_size_deg: f64) -> Result<Self> {
        bbox.validate()?;
        if !(tile_size_deg > 0.0) {
            return Err(Error::Config("tile_size_deg must be > 0".into()));
        }
        let rows = edge_index(bbox.lat_max - bbox.lat_min, tile_size_deg);
        let cols = edge_index(bbox.lon_max - bbox.lon_min, tile_size_deg);
        let n_rows = if (bbox.lat_min + rows * tile_size_deg) < bbox.lat_max - EDGE_SNAP * tile_size_deg {
            rows as usize + 1
        } else {
            rows as usize
        };
        let n_cols = if (bbox.lon_min + cols * tile_size_deg) < bbox.lon_max - EDGE_SNAP * tile_size_deg {
            cols as usize + 1
        } else {
            cols as usize
        };
        let grid = GridSpec {
            origin_lat: bbox.lat_min,
            origin_lon: bbox.lon_min,
            tile_size_deg,
            n_rows: n_rows.max(1),
            n_cols: n_cols.max(1),
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tile_size_deg > 0.0) || !self.tile_size_deg.is_finite() {
            return Err(Error::Config("grid.tile_size_deg must be a positive number".into()));
        }
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(Error::Config("grid.n_rows and grid.n_cols must be > 0".into()));
        }
        if !self.origin_lat.is_finite() || !self.origin_lon.is_finite() {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn n_tiles(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn tile_index(&self, tile: TileId) -> usize {
        tile.row * self.n_cols + tile.col
    }

    /// South-west corner of `tile`.
    pub fn tile_origin(&self, tile: TileId) -> (f64, f64) {
        (
            self.origin_lat + tile.row as f64 * self.tile_size_deg,
            self.origin_lon + tile.col as f64 * self.tile_size_deg,
        )
    }
}

/// Maps a point onto its tile.
pub fn assign_tile(lat: f64, lon: f64, grid: &GridSpec) -> Result<TileId> {
    let out = || Error::OutOfExtent { lat, lon };
    if !lat.is_finite() || !lon.is_finite() {
        return Err(out());
    }
    let row = edge_index(lat - grid.origin_lat, grid.tile_size_deg);
    let col = edge_index(lon - grid.origin_lon, grid.tile_size_deg);
    if row < 0.0 || col < 0.0 || row >= grid.n_rows as f64 || col >= grid.n_cols as f64 {
        return Err(out());
    }
    Ok(TileId::new(row as usize, col as usize))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    /// UTC start of window 0. Accepts seconds or an RFC 3339 string in JSON.
    #[serde(serialize_with = "ser_epoch", deserialize_with = "de_epoch")]
    pub epoch: i64,
    #[serde(default = "default_months")]
    pub span_months: u32,
    #[serde(default = "default_months")]
    pub stride_months: u32,
    /// Number of windows in the study horizon.
    pub count: usize,
}

fn default_months() -> u32 {
    3
}

fn ser_epoch<S: Serializer>(epoch: &i64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_i64(*epoch)
}

fn de_epoch<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<i64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Seconds(i64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Seconds(s) => Ok(s),
        Raw::Text(t) => DateTime::parse_from_rfc3339(&t)
            .map(|dt| dt.timestamp())
            .map_err(serde::de::Error::custom),
    }
}

impl WindowSpec {
    /// Disjoint calendar quarters starting on 1 January of `start_year` and
    /// running through the end of `end_year`.
    pub fn quarterly(start_year: i32, end_year: i32) -> Self {
        let epoch = Utc
            .with_ymd_and_hms(start_year, 1, 1, 0, 0, 0)
            .single()
            .expect("1 January always exists")
            .timestamp();
        WindowSpec {
            epoch,
            span_months: 3,
            stride_months: 3,
            count: ((end_year - start_year + 1).max(0) * 4) as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.span_months < 1 || self.stride_months < 1 {
            return Err(Error::Config("window span and stride must be >= 1 month".into()));
        }
        if self.stride_months > self.span_months {
            return Err(Error::Config("window stride must not exceed span".into()));
        }
        if self.count == 0 {
            return Err(Error::Config("window count must be > 0".into()));
        }
        self.epoch_datetime()?;
        Ok(())
    }

    fn epoch_datetime(&self) -> Result<DateTime<Utc>> {
        Utc.timestamp_opt(self.epoch, 0)
            .single()
            .ok_or_else(|| Error::Config(format!("epoch {} is not a valid timestamp", self.epoch)))
    }

    fn offset_months(&self, months: u32) -> i64 {
        let epoch = self.epoch_datetime().expect("validated epoch");
        epoch
            .checked_add_months(Months::new(months))
            .expect("window boundary within chrono range")
            .timestamp()
    }

    pub fn start(&self, window: usize) -> i64 {
        self.offset_months(window as u32 * self.stride_months)
    }

    /// Exclusive end of `window`.
    pub fn end(&self, window: usize) -> i64 {
        self.offset_months(window as u32 * self.stride_months + self.span_months)
    }

    /// Calendar year in which `window` starts.
    pub fn year_of(&self, window: usize) -> i32 {
        Utc.timestamp_opt(self.start(window), 0)
            .single()
            .map(|d| d.year())
            .unwrap_or_default()
    }

    /// Position of `window` within a repeating seasonal cycle, when the
    /// stride divides a year; otherwise every window is its own season.
    pub fn season_of(&self, window: usize) -> usize {
        match self.season_period() {
            Some(p) => window % p,
            None => window,
        }
    }

    pub fn season_period(&self) -> Option<usize> {
        (12 % self.stride_months == 0).then_some((12 / self.stride_months) as usize)
    }
}

/// All windows whose `[start, start + span)` contains `timestamp`.
pub fn assign_window(timestamp: i64, spec: &WindowSpec) -> Result<Vec<usize>> {
    if timestamp < spec.epoch {
        return Err(Error::BeforeEpoch {
            timestamp,
            epoch: spec.epoch,
        });
    }
    let epoch = spec.epoch_datetime()?;
    let ts = Utc
        .timestamp_opt(timestamp, 0)
        .single()
        .ok_or_else(|| Error::Config(format!("invalid timestamp {timestamp}")))?;
    // Calendar months elapsed, as an upper bound for candidate windows.
    let months = (ts.year() - epoch.year()) * 12 + ts.month() as i32 - epoch.month() as i32;
    let months = months.max(0) as usize;
    let stride = spec.stride_months as usize;
    let last = months / stride;
    let first = (months + 1).saturating_sub(spec.span_months as usize + 1) / stride;
    Ok((first..=last)
        .filter(|&k| spec.start(k) <= timestamp && timestamp < spec.end(k))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub tile: TileId,
    pub band: String,
    pub window: usize,
    pub avg_ul: f64,
    pub avg_dl: f64,
    pub min_latency: f64,
    pub mean_latency: f64,
    pub avg_jitter: f64,
    pub min_jitter: f64,
    pub sum_bytes_tx: u64,
    pub sum_bytes_rx: u64,
    pub mean_signal: f64,
    pub connection_count: u64,
    pub unique_devices: u64,
    pub sample_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyTarget {
    pub tile: TileId,
    pub window: usize,
    pub deployed_bw_mhz: f64,
}

type CellKey = (TileId, String, usize);

fn canonical_order(a: &RawSample, b: &RawSample) -> std::cmp::Ordering {
    a.device_id
        .cmp(&b.device_id)
        .then(a.timestamp.cmp(&b.timestamp))
        .then(a.lat.total_cmp(&b.lat))
        .then(a.lon.total_cmp(&b.lon))
        .then(a.ul_throughput.total_cmp(&b.ul_throughput))
        .then(a.dl_throughput.total_cmp(&b.dl_throughput))
        .then(a.latency_ms.total_cmp(&b.latency_ms))
        .then(a.jitter_ms.total_cmp(&b.jitter_ms))
        .then(a.bytes_tx.cmp(&b.bytes_tx))
        .then(a.bytes_rx.cmp(&b.bytes_rx))
        .then(a.signal_dbm.total_cmp(&b.signal_dbm))
        .then(a.connections.cmp(&b.connections))
}

fn summarize(tile: TileId, band: String, window: usize, mut group: Vec<&RawSample>) -> CellAggregate {
    // Sums run in a canonical order so results do not depend on input order.
    group.sort_by(|a, b| canonical_order(a, b));
    let n = group.len() as f64;
    let mut cell = CellAggregate {
        tile,
        band,
        window,
        avg_ul: 0.0,
        avg_dl: 0.0,
        min_latency: f64::INFINITY,
        mean_latency: 0.0,
        avg_jitter: 0.0,
        min_jitter: f64::INFINITY,
        sum_bytes_tx: 0,
        sum_bytes_rx: 0,
        mean_signal: 0.0,
        connection_count: 0,
        unique_devices: 0,
        sample_count: group.len() as u64,
    };
    let mut devices = BTreeSet::new();
    for s in &group {
        cell.avg_ul += s.ul_throughput;
        cell.avg_dl += s.dl_throughput;
        cell.min_latency = cell.min_latency.min(s.latency_ms);
        cell.mean_latency += s.latency_ms;
        cell.avg_jitter += s.jitter_ms;
        cell.min_jitter = cell.min_jitter.min(s.jitter_ms);
        cell.sum_bytes_tx += s.bytes_tx;
        cell.sum_bytes_rx += s.bytes_rx;
        cell.mean_signal += s.signal_dbm;
        cell.connection_count += s.connections;
        devices.insert(s.device_id.as_str());
    }
    cell.avg_ul /= n;
    cell.avg_dl /= n;
    cell.mean_latency /= n;
    cell.avg_jitter /= n;
    cell.mean_signal /= n;
    // Means of a single repeated value can round a hair below the minimum.
    cell.mean_latency = cell.mean_latency.max(cell.min_latency);
    cell.avg_jitter = cell.avg_jitter.max(cell.min_jitter);
    cell.unique_devices = devices.len() as u64;
    cell
}

/// Outcome of [`aggregate`], including how many samples fell off the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub cells: Vec<CellAggregate>,
    pub dropped_out_of_extent: usize,
    pub dropped_out_of_horizon: usize,
}

/// Averages samples per (tile, band, window). Cells come back sorted by key.
pub fn aggregate(samples: &[RawSample], grid: &GridSpec, windows: &WindowSpec) -> Result<Aggregation> {
    grid.validate()?;
    windows.validate()?;
    let mut groups: BTreeMap<CellKey, Vec<&RawSample>> = BTreeMap::new();
    let mut dropped_out_of_extent = 0;
    let mut dropped_out_of_horizon = 0;
    for s in samples {
        let tile = match assign_tile(s.lat, s.lon, grid) {
            Ok(t) => t,
            Err(_) => {
                dropped_out_of_extent += 1;
                continue;
            }
        };
        let assigned = match assign_window(s.timestamp, windows) {
            Ok(w) => w,
            Err(_) => {
                dropped_out_of_horizon += 1;
                continue;
            }
        };
        let mut kept = false;
        for w in assigned.into_iter().filter(|&w| w < windows.count) {
            kept = true;
            groups.entry((tile, s.band.clone(), w)).or_default().push(s);
        }
        if !kept {
            dropped_out_of_horizon += 1;
        }
    }
    if dropped_out_of_extent > 0 {
        log::warn!("{dropped_out_of_extent} samples outside the grid were dropped");
    }
    let cells = groups
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|((tile, band, window), group)| summarize(tile, band, window, group))
        .collect();
    Ok(Aggregation {
        cells,
        dropped_out_of_extent,
        dropped_out_of_horizon,
    })
}

/// `(effective_from, bandwidth MHz)` filings of one site and band.
type Filings = Vec<(i64, f64)>;

/// Deployed bandwidth per tile and window.
///
/// A filing takes effect at `effective_from` and stays in force until a later
/// filing for the same `(site_id, band)` supersedes it; there is no
/// decommissioning. A tile's proxy at window `k` is the sum over all
/// `(site, band)` pairs of the latest filing effective before the window's
/// end. Tiles without any site are absent; windows before a tile's first
/// activation report zero.
pub fn aggregate_proxy(
    records: &[RegulatoryRecord],
    grid: &GridSpec,
    windows: &WindowSpec,
) -> Result<Vec<ProxyTarget>> {
    grid.validate()?;
    windows.validate()?;
    // tile -> (site, band) -> filings sorted by effective_from
    let mut by_tile: BTreeMap<TileId, BTreeMap<(&str, &str), Filings>> = BTreeMap::new();
    for r in records {
        let Ok(tile) = assign_tile(r.lat, r.lon, grid) else {
            log::warn!("site {} outside the grid was dropped", r.site_id);
            continue;
        };
        by_tile
            .entry(tile)
            .or_default()
            .entry((r.site_id.as_str(), r.band.as_str()))
            .or_default()
            .push((r.effective_from, r.deployed_bw_mhz));
    }
    let ends: Vec<i64> = (0..windows.count).map(|w| windows.end(w)).collect();
    let mut out = Vec::with_capacity(by_tile.len() * windows.count);
    for (tile, sites) in by_tile {
        let mut sites: Vec<Vec<(i64, f64)>> = sites.into_values().collect();
        for filings in &mut sites {
            // Stable: equal timestamps keep input order, so the last one wins.
            filings.sort_by_key(|f| f.0);
        }
        for (window, &end) in ends.iter().enumerate() {
            let mut total = 0.0;
            for filings in &sites {
                let active = filings.partition_point(|f| f.0 < end);
                if active > 0 {
                    total += filings[active - 1].1;
                }
            }
            out.push(ProxyTarget {
                tile,
                window,
                deployed_bw_mhz: total,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(y: i32, m: u32, d: u32) -> i64 {
        Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap().timestamp()
    }

    fn grid() -> GridSpec {
        GridSpec {
            origin_lat: 45.0,
            origin_lon: -76.0,
            tile_size_deg: 0.01,
            n_rows: 10,
            n_cols: 10,
        }
    }

    fn sample(device: &str, lat: f64, lon: f64, t: i64) -> RawSample {
        RawSample {
            device_id: device.into(),
            timestamp: t,
            lat,
            lon,
            band: "B4".into(),
            ul_throughput: 10.0,
            dl_throughput: 20.0,
            latency_ms: 20.0,
            jitter_ms: 3.0,
            bytes_tx: 100,
            bytes_rx: 400,
            signal_dbm: -90.0,
            connections: 2,
        }
    }

    #[test]
    fn first_tile() {
        assert_eq!(assign_tile(45.005, -75.995, &grid()).unwrap(), TileId::new(0, 0));
    }

    #[test]
    fn interior_boundary_belongs_to_next_tile() {
        assert_eq!(assign_tile(45.01, -75.99, &grid()).unwrap(), TileId::new(1, 1));
    }

    #[test]
    fn floor_arithmetic() {
        assert_eq!(assign_tile(45.037, -75.974, &grid()).unwrap(), TileId::new(3, 2));
    }

    #[test]
    fn outside_extent_is_an_error() {
        assert!(matches!(assign_tile(44.99, -75.5, &grid()), Err(Error::OutOfExtent { .. })));
        assert!(assign_tile(45.1, -75.95, &grid()).is_err());
        assert!(assign_tile(45.05, -75.9, &grid()).is_err());
    }

    #[test]
    fn quarterly_windows() {
        let spec = WindowSpec::quarterly(2019, 2023);
        assert_eq!(spec.count, 20);
        assert_eq!(assign_window(ts(2019, 2, 15), &spec).unwrap(), vec![0]);
        assert_eq!(assign_window(ts(2019, 4, 1), &spec).unwrap(), vec![1]);
        assert_eq!(assign_window(ts(2019, 3, 31) + 86_399, &spec).unwrap(), vec![0]);
        assert_eq!(spec.year_of(4), 2020);
        assert_eq!(spec.season_of(6), 2);
    }

    #[test]
    fn overlapping_windows() {
        let spec = WindowSpec {
            stride_months: 1,
            ..WindowSpec::quarterly(2019, 2023)
        };
        assert_eq!(assign_window(ts(2019, 5, 10), &spec).unwrap(), vec![2, 3, 4]);
        assert_eq!(assign_window(ts(2019, 1, 10), &spec).unwrap(), vec![0]);
    }

    #[test]
    fn before_epoch_is_an_error() {
        let spec = WindowSpec::quarterly(2019, 2023);
        assert!(matches!(assign_window(ts(2018, 12, 31), &spec), Err(Error::BeforeEpoch { .. })));
    }

    #[test]
    fn invalid_window_specs() {
        let base = WindowSpec::quarterly(2019, 2020);
        assert!(WindowSpec { span_months: 0, ..base }.validate().is_err());
        assert!(WindowSpec { stride_months: 4, ..base }.validate().is_err());
        assert!(WindowSpec { count: 0, ..base }.validate().is_err());
    }

    #[test]
    fn two_point_latency_mean() {
        let spec = WindowSpec::quarterly(2019, 2019);
        let mut a = sample("d1", 45.005, -75.995, ts(2019, 1, 5));
        let mut b = sample("d2", 45.006, -75.996, ts(2019, 1, 6));
        a.latency_ms = 20.0;
        b.latency_ms = 40.0;
        let cells = aggregate(&[a, b], &grid(), &spec).unwrap().cells;
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].min_latency, 20.0);
        assert_eq!(cells[0].mean_latency, 30.0);
    }

    #[test]
    fn single_sample_is_identity() {
        let spec = WindowSpec::quarterly(2019, 2019);
        let s = sample("d1", 45.005, -75.995, ts(2019, 1, 5));
        let c = &aggregate(std::slice::from_ref(&s), &grid(), &spec).unwrap().cells[0];
        assert_eq!(c.sample_count, 1);
        assert_eq!(c.avg_ul, s.ul_throughput);
        assert_eq!(c.avg_dl, s.dl_throughput);
        assert_eq!(c.min_latency, s.latency_ms);
        assert_eq!(c.mean_latency, s.latency_ms);
        assert_eq!(c.avg_jitter, s.jitter_ms);
        assert_eq!(c.min_jitter, s.jitter_ms);
        assert_eq!(c.sum_bytes_tx, s.bytes_tx);
        assert_eq!(c.sum_bytes_rx, s.bytes_rx);
        assert_eq!(c.mean_signal, s.signal_dbm);
        assert_eq!(c.connection_count, s.connections);
        assert_eq!(c.unique_devices, 1);
    }

    #[test]
    fn three_samples_two_devices() {
        let spec = WindowSpec::quarterly(2019, 2019);
        let mut rows = vec![
            sample("d1", 45.001, -75.999, ts(2019, 1, 2)),
            sample("d2", 45.002, -75.998, ts(2019, 2, 2)),
            sample("d1", 45.003, -75.997, ts(2019, 3, 2)),
        ];
        rows[0].connections = 1;
        rows[1].connections = 4;
        rows[2].connections = 2;
        let c = &aggregate(&rows, &grid(), &spec).unwrap().cells[0];
        assert_eq!(c.unique_devices, 2);
        assert_eq!(c.connection_count, 7);
        assert_eq!(c.sample_count, 3);
    }

    #[test]
    fn samples_off_grid_are_counted_and_dropped() {
        let spec = WindowSpec::quarterly(2019, 2019);
        let rows = vec![
            sample("d1", 45.001, -75.999, ts(2019, 1, 2)),
            sample("d2", 44.0, -75.998, ts(2019, 2, 2)),
            sample("d3", 45.001, -75.999, ts(2021, 2, 2)),
        ];
        let agg = aggregate(&rows, &grid(), &spec).unwrap();
        assert_eq!(agg.dropped_out_of_extent, 1);
        assert_eq!(agg.dropped_out_of_horizon, 1);
        assert_eq!(agg.cells.len(), 1);
    }

    fn record(site: &str, bw: f64, from: i64) -> RegulatoryRecord {
        RegulatoryRecord {
            site_id: site.into(),
            lat: 45.005,
            lon: -75.995,
            band: "B4".into(),
            deployed_bw_mhz: bw,
            effective_from: from,
        }
    }

    #[test]
    fn proxy_activation_is_monotone() {
        let spec = WindowSpec::quarterly(2019, 2020);
        let proxy = aggregate_proxy(&[record("s1", 20.0, spec.epoch)], &grid(), &spec).unwrap();
        assert_eq!(proxy.len(), 8);
        assert!(proxy.iter().all(|p| p.deployed_bw_mhz >= 20.0));
    }

    #[test]
    fn proxy_is_additive_over_sites() {
        let spec = WindowSpec::quarterly(2019, 2019);
        let proxy = aggregate_proxy(
            &[record("s1", 10.0, spec.epoch), record("s2", 15.0, spec.epoch)],
            &grid(),
            &spec,
        )
        .unwrap();
        assert!(proxy.iter().all(|p| p.deployed_bw_mhz == 25.0));
    }

    #[test]
    fn proxy_counts_site_effective_mid_window() {
        let spec = WindowSpec::quarterly(2019, 2019);
        let mid = ts(2019, 8, 15);
        let proxy = aggregate_proxy(&[record("s1", 12.0, mid)], &grid(), &spec).unwrap();
        let bw: Vec<f64> = proxy.iter().map(|p| p.deployed_bw_mhz).collect();
        assert_eq!(bw, vec![0.0, 0.0, 12.0, 12.0]);
    }

    #[test]
    fn later_filing_supersedes_earlier_one() {
        let spec = WindowSpec::quarterly(2019, 2019);
        let proxy = aggregate_proxy(
            &[record("s1", 30.0, ts(2019, 4, 2)), record("s1", 10.0, spec.epoch)],
            &grid(),
            &spec,
        )
        .unwrap();
        let bw: Vec<f64> = proxy.iter().map(|p| p.deployed_bw_mhz).collect();
        assert_eq!(bw, vec![10.0, 30.0, 30.0, 30.0]);
    }

    #[test]
    fn covering_grid() {
        let bbox = crate::synthgen::BBox {
            lat_min: 45.0,
            lat_max: 45.08,
            lon_min: -76.0,
            lon_max: -75.92,
        };
        let g = GridSpec::covering(bbox, 0.01).unwrap();
        assert_eq!((g.n_rows, g.n_cols), (8, 8));
        let g = GridSpec::covering(bbox, 0.03).unwrap();
        assert_eq!((g.n_rows, g.n_cols), (3, 3));
    }

    #[test]
    fn tile_id_text_round_trip() {
        let t = TileId::new(3, 12);
        assert_eq!(t.to_string(), "r3c12");
        assert_eq!("r3c12".parse::<TileId>().unwrap(), t);
        assert_eq!(serde_json::to_string(&t).unwrap(), "\"r3c12\"");
        assert!("3c12".parse::<TileId>().is_err());
        assert!("r3cx".parse::<TileId>().is_err());
    }
}
