//! Deterministic synthetic crowdsourced measurements and site filings.
//!
//! Each tile carries seven latent drivers, one per engineered KPI, that follow
//! stationary AR(1) processes around a density-dependent level. Raw sample
//! fields are noisy transforms of the drivers chosen so that the engineered
//! KPI of a cell estimates its driver. The tile's deployed bandwidth is a
//! linear function of the drivers at lags 0, 1 and 2 plus a quarterly
//! sinusoid, a linear trend and Gaussian noise, and is published as a series
//! of per-site filings that supersede one another every window.
//!
//! Every random draw comes from a ChaCha stream keyed by
//! `(seed, tile, window, purpose)`, so output does not depend on the order in
//! which tiles are generated or on the worker count.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kpi::KpiWeights;
use crate::rng;
use crate::spatial::{GridSpec, TileId, WindowSpec};

/// Expected samples per tile and window at density 1.
pub const SAMPLES_PER_UNIT_DENSITY: f64 = 40.0;

/// Floor applied to generated bandwidth so filings stay positive.
pub const MIN_DEPLOYED_BW_MHZ: f64 = 1.0;

/// Drivers are generated this many windows before window 0 so that lagged
/// terms exist for the first windows.
pub const DRIVER_LEAD: usize = 2;

pub const SIGNAL_RANGE_DBM: (f64, f64) = (-140.0, -40.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BBox {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.lat_min, self.lat_max, self.lon_min, self.lon_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.lat_min < self.lat_max) || !(self.lon_min < self.lon_max) {
            return Err(Error::Config(format!(
                "empty bounding box [{}, {}] x [{}, {}]",
                self.lat_min, self.lat_max, self.lon_min, self.lon_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionProfile {
    pub name: String,
    pub bbox: BBox,
    /// Row-major relative user density; row 0 is the southern edge.
    pub density_map: Vec<Vec<f64>>,
    pub bands: Vec<String>,
    pub years: (i32, i32),
}

impl RegionProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("region `{}`: {m}", self.name)));
        if self.name.is_empty() {
            return Err(Error::Config("region name must not be empty".into()));
        }
        self.bbox.validate()?;
        let rows = self.density_map.len();
        let cols = self.density_map.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return bad("density_map has zero-area tiles".into());
        }
        if self.density_map.iter().any(|r| r.len() != cols) {
            return bad("density_map rows differ in length".into());
        }
        if self
            .density_map
            .iter()
            .flatten()
            .any(|d| !(0.0..=1.0).contains(d))
        {
            return bad("density values must lie in [0, 1]".into());
        }
        if self.bands.is_empty() {
            return bad("at least one band is required".into());
        }
        if self.years.0 > self.years.1 {
            return bad("start_year must not exceed end_year".into());
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.density_map.len()
    }

    pub fn cols(&self) -> usize {
        self.density_map.first().map_or(0, Vec::len)
    }

    pub fn tile_height(&self) -> f64 {
        (self.bbox.lat_max - self.bbox.lat_min) / self.rows() as f64
    }

    pub fn tile_width(&self) -> f64 {
        (self.bbox.lon_max - self.bbox.lon_min) / self.cols() as f64
    }

    /// Tile grid matching the density map, when its cells are square.
    pub fn native_grid(&self) -> Result<GridSpec> {
        self.validate()?;
        let (h, w) = (self.tile_height(), self.tile_width());
        if (h - w).abs() > 1e-9 * h.max(w) {
            return Err(Error::Config(format!(
                "region `{}` has non-square density cells ({h} x {w} deg); set grid.tile_size_deg",
                self.name
            )));
        }
        Ok(GridSpec {
            origin_lat: self.bbox.lat_min,
            origin_lon: self.bbox.lon_min,
            tile_size_deg: h,
            n_rows: self.rows(),
            n_cols: self.cols(),
        })
    }

    pub fn windows(&self) -> WindowSpec {
        WindowSpec::quarterly(self.years.0, self.years.1)
    }

    pub fn density_integral(&self) -> f64 {
        self.density_map.iter().flatten().sum()
    }

    /// Expected number of generated samples.
    pub fn expected_samples(&self) -> f64 {
        self.density_integral() * SAMPLES_PER_UNIT_DENSITY * self.windows().count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSpec {
    pub weights_lag0: KpiWeights,
    pub weights_lag1: KpiWeights,
    pub weights_lag2: KpiWeights,
    pub noise_sigma: f64,
    pub seasonal_amplitude: f64,
    pub trend_per_quarter: f64,
    /// Bandwidth level before any KPI contribution, MHz.
    pub base_bw_mhz: f64,
}

impl Default for CouplingSpec {
    /// The default coupled scenario: traffic volume one quarter back is the
    /// dominant driver, with smaller contributions spread over the others.
    fn default() -> Self {
        CouplingSpec {
            weights_lag0: KpiWeights {
                signal_strength: 0.5,
                ..KpiWeights::default()
            },
            weights_lag1: KpiWeights {
                traffic_volume: 3.5,
                latency_ratio: -30.0,
                norm_connections: 4.0,
                jitter_variability: 2.0,
                ..KpiWeights::default()
            },
            weights_lag2: KpiWeights {
                tx_rx_ratio: 40.0,
                sum_throughput: 2.0e-8,
                ..KpiWeights::default()
            },
            noise_sigma: 3.0,
            seasonal_amplitude: 2.0,
            trend_per_quarter: 0.0,
            base_bw_mhz: 120.0,
        }
    }
}

impl CouplingSpec {
    /// No KPI dependence, noise, seasonality or trend.
    pub fn flat(base_bw_mhz: f64) -> Self {
        CouplingSpec {
            weights_lag0: KpiWeights::default(),
            weights_lag1: KpiWeights::default(),
            weights_lag2: KpiWeights::default(),
            noise_sigma: 0.0,
            seasonal_amplitude: 0.0,
            trend_per_quarter: 0.0,
            base_bw_mhz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("coupling.noise_sigma must be >= 0".into()));
        }
        if !(self.seasonal_amplitude >= 0.0) {
            return Err(Error::Config("coupling.seasonal_amplitude must be >= 0".into()));
        }
        let all = [self.weights_lag0, self.weights_lag1, self.weights_lag2];
        if all.iter().flat_map(|w| w.to_array()).any(|v| !v.is_finite())
            || !self.trend_per_quarter.is_finite()
            || !self.base_bw_mhz.is_finite()
        {
            return Err(Error::Config("coupling values must be finite".into()));
        }
        Ok(())
    }

    pub fn weights(&self, lag: usize) -> &KpiWeights {
        match lag {
            0 => &self.weights_lag0,
            1 => &self.weights_lag1,
            2 => &self.weights_lag2,
            _ => panic!("coupling is defined for lags 0..=2"),
        }
    }

    /// Seasonal plus trend contribution at `window`.
    pub fn calendar_term(&self, window: usize) -> f64 {
        let t = window as f64;
        self.seasonal_amplitude * (2.0 * PI * t / 4.0).sin() + self.trend_per_quarter * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub device_id: String,
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    pub band: String,
    #[serde(rename = "ul_mbps")]
    pub ul_throughput: f64,
    #[serde(rename = "dl_mbps")]
    pub dl_throughput: f64,
    pub latency_ms: f64,
    pub jitter_ms: f64,
    pub bytes_tx: u64,
    pub bytes_rx: u64,
    pub signal_dbm: f64,
    pub connections: u64,
}

impl RawSample {
    /// Checks the documented field ranges.
    pub fn in_range(&self) -> bool {
        self.ul_throughput >= 0.0
            && self.dl_throughput >= 0.0
            && self.latency_ms > 0.0
            && self.jitter_ms >= 0.0
            && (SIGNAL_RANGE_DBM.0..=SIGNAL_RANGE_DBM.1).contains(&self.signal_dbm)
            && self.lat.is_finite()
            && self.lon.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulatoryRecord {
    pub site_id: String,
    pub lat: f64,
    pub lon: f64,
    pub band: String,
    pub deployed_bw_mhz: f64,
    pub effective_from: i64,
}

/// Latent dynamics of one KPI driver.
#[derive(Debug, Clone, Copy)]
struct Driver {
    level: f64,
    density_gain: f64,
    spread: f64,
    persistence: f64,
    /// Drift of the level per window.
    growth: f64,
    lo: f64,
    hi: f64,
}

/// Indexed like [`crate::kpi::Kpi::ALL`].
const DRIVERS: [Driver; 7] = [
    // traffic volume, Mbps
    Driver { level: 40.0, density_gain: 6.0, spread: 12.0, persistence: 0.2, growth: 0.0, lo: 2.0, hi: 400.0 },
    // latency ratio
    Driver { level: 0.55, density_gain: -0.1, spread: 0.08, persistence: 0.6, growth: 0.0, lo: 0.05, hi: 0.95 },
    // tx/rx ratio
    Driver { level: 0.25, density_gain: 0.05, spread: 0.05, persistence: 0.6, growth: 0.0, lo: 0.02, hi: 5.0 },
    // connections per device
    Driver { level: 3.0, density_gain: 1.0, spread: 0.6, persistence: 0.6, growth: 0.0, lo: 0.1, hi: 50.0 },
    // signal strength, dBm
    Driver { level: -100.0, density_gain: 12.0, spread: 4.0, persistence: 0.7, growth: 0.0, lo: -130.0, hi: -50.0 },
    // jitter variability, ms
    Driver { level: 4.0, density_gain: 1.0, spread: 1.0, persistence: 0.6, growth: 0.0, lo: 0.0, hi: 100.0 },
    // sum throughput, bytes per band cell
    Driver { level: 2.0e9, density_gain: 6.0e8, spread: 1.5e8, persistence: 0.7, growth: 2.0e8, lo: 1.0e7, hi: 1.0e12 },
];

/// Stream purposes.
const STREAM_DRIVER: u64 = 1;
const STREAM_SAMPLES: u64 = 2;
const STREAM_PROXY: u64 = 3;
const STREAM_SITES: u64 = 4;
const STREAM_FILINGS: u64 = 5;

/// Latent state of one generated tile.
#[derive(Debug, Clone, PartialEq)]
pub struct TileTruth {
    pub tile: TileId,
    pub density: f64,
    /// Entry `i` holds the drivers of window `i - DRIVER_LEAD`.
    pub drivers: Vec<[f64; 7]>,
    /// Generated deployed bandwidth per window.
    pub proxy: Vec<f64>,
}

impl TileTruth {
    /// Driver vector at `window - lag`.
    pub fn driver(&self, window: usize, lag: usize) -> &[f64; 7] {
        &self.drivers[window + DRIVER_LEAD - lag]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedRegion {
    pub samples: Vec<RawSample>,
    pub regulatory: Vec<RegulatoryRecord>,
    /// Tiles with positive density, in row-major order.
    pub truth: Vec<TileTruth>,
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn tile_drivers(seed: u64, tile_idx: u64, density: f64, n_windows: usize) -> Vec<[f64; 7]> {
    let total = n_windows + DRIVER_LEAD;
    let mut state = [0.0f64; 7];
    let mut out = Vec::with_capacity(total);
    for i in 0..total {
        let mut rng = rng::stream(seed, &[STREAM_DRIVER, tile_idx, i as u64]);
        let mut values = [0.0; 7];
        for (k, d) in DRIVERS.iter().enumerate() {
            let e = normal(&mut rng);
            state[k] = if i == 0 {
                e
            } else {
                d.persistence * state[k] + (1.0 - d.persistence * d.persistence).sqrt() * e
            };
            let level = d.level + d.growth * i as f64 + d.density_gain * density;
            values[k] = (level + d.spread * state[k]).clamp(d.lo, d.hi);
        }
        out.push(values);
    }
    out
}

fn tile_proxy(seed: u64, tile_idx: u64, coupling: &CouplingSpec, drivers: &[[f64; 7]], n_windows: usize) -> Vec<f64> {
    (0..n_windows)
        .map(|t| {
            let mut bw = coupling.base_bw_mhz + coupling.calendar_term(t);
            for lag in 0..=2 {
                bw += coupling.weights(lag).dot(&drivers[t + DRIVER_LEAD - lag]);
            }
            if coupling.noise_sigma > 0.0 {
                let mut rng = rng::stream(seed, &[STREAM_PROXY, tile_idx, t as u64]);
                bw += coupling.noise_sigma * normal(&mut rng);
            }
            bw.max(MIN_DEPLOYED_BW_MHZ)
        })
        .collect()
}

struct CellContext<'a> {
    profile: &'a RegionProfile,
    seed: u64,
    tile: TileId,
    tile_idx: u64,
    density: f64,
    window: usize,
    window_start: i64,
    window_end: i64,
    drivers: &'a [f64; 7],
}

fn pick_band(rng: &mut impl Rng, n_bands: usize) -> usize {
    // The first band carries twice the share of each other band.
    let total = n_bands + 1;
    let r = rng.random_range(0..total);
    r.saturating_sub(1)
}

fn generate_cell(ctx: &CellContext<'_>) -> Vec<RawSample> {
    let mut rng = rng::stream(ctx.seed, &[STREAM_SAMPLES, ctx.tile_idx, ctx.window as u64]);
    let lambda = SAMPLES_PER_UNIT_DENSITY * ctx.density;
    let n = if lambda > 0.0 {
        Poisson::new(lambda).map(|p| p.sample(&mut rng) as usize).unwrap_or(0)
    } else {
        0
    };
    if n == 0 {
        return Vec::new();
    }
    let profile = ctx.profile;
    let n_bands = profile.bands.len();
    let pool = (lambda / 2.0).round().max(2.0) as u64;
    let (lat0, lon0) = (
        profile.bbox.lat_min + ctx.tile.row as f64 * profile.tile_height(),
        profile.bbox.lon_min + ctx.tile.col as f64 * profile.tile_width(),
    );

    let mut bands = vec![Vec::new(); n_bands];
    for i in 0..n {
        bands[pick_band(&mut rng, n_bands)].push(i);
    }
    let [traffic, latency_ratio, tx_rx, conn_per_device, signal, jitter_var, volume] = *ctx.drivers;
    let mean_latency = 20.0 + 25.0 * (1.0 - ctx.density);
    let span = (ctx.window_end - ctx.window_start).max(1);

    let mut out = Vec::with_capacity(n);
    for (b, members) in bands.iter().enumerate() {
        let m = members.len();
        if m == 0 {
            continue;
        }
        let devices: Vec<u64> = (0..m).map(|_| rng.random_range(0..pool)).collect();
        let mut distinct = devices.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let conn_mean = conn_per_device * distinct.len() as f64 / m as f64;

        // Byte shares normalised so the cell's total tracks the volume driver.
        let shares: Vec<f64> = (0..m).map(|_| (1.0 + 0.3 * normal(&mut rng)).max(0.1)).collect();
        let share_sum: f64 = shares.iter().sum();

        for (j, &device) in devices.iter().enumerate() {
            let dl = (traffic * 0.8 * (1.0 + 0.3 * normal(&mut rng))).max(0.0);
            let ul = (traffic * 0.2 * (1.0 + 0.3 * normal(&mut rng))).max(0.0);
            let latency = mean_latency * (latency_ratio + (1.0 - latency_ratio) * 2.0 * rng.random::<f64>());
            let jitter = 1.5 + jitter_var * 2.0 * rng.random::<f64>();
            let rx_total = volume / (1.0 + tx_rx) * shares[j] / share_sum;
            let bytes_rx = rx_total.round().max(1.0);
            let bytes_tx = (tx_rx * rx_total * (1.0 + 0.1 * normal(&mut rng))).round().max(0.0);
            let sig = (signal + 4.0 * normal(&mut rng)).clamp(SIGNAL_RANGE_DBM.0, SIGNAL_RANGE_DBM.1);
            let base = conn_mean.floor();
            let connections = base as u64 + u64::from(rng.random::<f64>() < conn_mean - base);
            let timestamp = ctx.window_start + rng.random_range(0..span);
            out.push(RawSample {
                device_id: format!(
                    "{}-{:03}-{:03}-{:04}",
                    profile.name, ctx.tile.row, ctx.tile.col, device
                ),
                timestamp,
                lat: lat0 + (0.001 + 0.998 * rng.random::<f64>()) * profile.tile_height(),
                lon: lon0 + (0.001 + 0.998 * rng.random::<f64>()) * profile.tile_width(),
                band: profile.bands[b].clone(),
                ul_throughput: ul,
                dl_throughput: dl,
                latency_ms: latency.max(f64::MIN_POSITIVE),
                jitter_ms: jitter,
                bytes_tx: bytes_tx as u64,
                bytes_rx: bytes_rx as u64,
                signal_dbm: sig,
                connections,
            });
        }
    }
    out
}

fn tile_filings(
    profile: &RegionProfile,
    seed: u64,
    truth: &TileTruth,
    tile_idx: u64,
    windows: &WindowSpec,
) -> Vec<RegulatoryRecord> {
    let mut rng = rng::stream(seed, &[STREAM_SITES, tile_idx]);
    let n_sites = 1 + ((truth.density * 3.0).floor() as usize).min(3);
    let (lat0, lon0) = (
        profile.bbox.lat_min + truth.tile.row as f64 * profile.tile_height(),
        profile.bbox.lon_min + truth.tile.col as f64 * profile.tile_width(),
    );
    let sites: Vec<(String, f64, f64, String, f64)> = (0..n_sites)
        .map(|k| {
            (
                format!("{}-site-{:03}-{:03}-{}", profile.name, truth.tile.row, truth.tile.col, k),
                lat0 + (0.001 + 0.998 * rng.random::<f64>()) * profile.tile_height(),
                lon0 + (0.001 + 0.998 * rng.random::<f64>()) * profile.tile_width(),
                profile.bands[k % profile.bands.len()].clone(),
                0.5 + rng.random::<f64>(),
            )
        })
        .collect();
    let share_sum: f64 = sites.iter().map(|s| s.4).sum();
    let mut out = Vec::with_capacity(n_sites * truth.proxy.len());
    for (w, &bw) in truth.proxy.iter().enumerate() {
        let mut frng = rng::stream(seed, &[STREAM_FILINGS, tile_idx, w as u64]);
        // Filings land in the first month of their window.
        let month = 30 * 86_400;
        for (site_id, lat, lon, band, share) in &sites {
            out.push(RegulatoryRecord {
                site_id: site_id.clone(),
                lat: *lat,
                lon: *lon,
                band: band.clone(),
                deployed_bw_mhz: bw * share / share_sum,
                effective_from: windows.start(w) + frng.random_range(0..month),
            });
        }
    }
    out
}

/// Generates one region's samples, filings and latent ground truth.
///
/// The result is a pure function of `(profile, coupling, seed)`. Samples are
/// sorted by timestamp, then device, then remaining fields; filings by
/// effective time then site.
pub fn generate_region(profile: &RegionProfile, coupling: &CouplingSpec, seed: u64) -> Result<GeneratedRegion> {
    profile.validate()?;
    coupling.validate()?;
    let windows = profile.windows();
    let n_windows = windows.count;
    let cols = profile.cols();

    let tiles: Vec<(TileId, f64)> = profile
        .density_map
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &d)| (TileId::new(r, c), d)))
        .filter(|(_, d)| *d > 0.0)
        .collect();

    let truth: Vec<TileTruth> = tiles
        .par_iter()
        .map(|&(tile, density)| {
            let idx = (tile.row * cols + tile.col) as u64;
            let drivers = tile_drivers(seed, idx, density, n_windows);
            let proxy = tile_proxy(seed, idx, coupling, &drivers, n_windows);
            TileTruth {
                tile,
                density,
                drivers,
                proxy,
            }
        })
        .collect();

    let cells: Vec<(usize, usize)> = (0..truth.len())
        .flat_map(|t| (0..n_windows).map(move |w| (t, w)))
        .collect();
    let mut samples: Vec<RawSample> = cells
        .par_iter()
        .flat_map_iter(|&(t, w)| {
            let tt = &truth[t];
            generate_cell(&CellContext {
                profile,
                seed,
                tile: tt.tile,
                tile_idx: (tt.tile.row * cols + tt.tile.col) as u64,
                density: tt.density,
                window: w,
                window_start: windows.start(w),
                window_end: windows.end(w),
                drivers: tt.driver(w, 0),
            })
        })
        .collect();
    samples.par_sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.device_id.cmp(&b.device_id))
            .then_with(|| a.lat.total_cmp(&b.lat))
            .then_with(|| a.lon.total_cmp(&b.lon))
            .then_with(|| a.band.cmp(&b.band))
    });

    let mut regulatory: Vec<RegulatoryRecord> = truth
        .par_iter()
        .flat_map_iter(|tt| {
            let idx = (tt.tile.row * cols + tt.tile.col) as u64;
            tile_filings(profile, seed, tt, idx, &windows)
        })
        .collect();
    regulatory.sort_by(|a, b| {
        a.effective_from
            .cmp(&b.effective_from)
            .then_with(|| a.site_id.cmp(&b.site_id))
            .then_with(|| a.band.cmp(&b.band))
    });

    Ok(GeneratedRegion {
        samples,
        regulatory,
        truth,
    })
}

fn radial_density(rows: usize, cols: usize, floor: f64, reach: f64) -> Vec<Vec<f64>> {
    let (cr, cc) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
    let scale = rows.max(cols) as f64 / 2.0;
    (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| {
                    let d = (((r as f64 - cr).powi(2) + (c as f64 - cc).powi(2)).sqrt()) / scale;
                    let v = floor + (1.0 - floor) * (-(d / reach).powi(2)).exp();
                    (v * 1000.0).round() / 1000.0
                })
                .collect()
        })
        .collect()
}

/// Built-in presets: a medium-density `ottawa-like` market and a larger,
/// denser `toronto-like` one.
pub fn builtin_profiles() -> Vec<RegionProfile> {
    let bands = vec!["B4".to_string(), "B66".to_string(), "n78".to_string()];
    vec![
        RegionProfile {
            name: "ottawa-like".into(),
            bbox: BBox {
                lat_min: 45.30,
                lat_max: 45.38,
                lon_min: -75.80,
                lon_max: -75.72,
            },
            density_map: radial_density(8, 8, 0.1, 0.55),
            bands: bands.clone(),
            years: (2019, 2023),
        },
        RegionProfile {
            name: "toronto-like".into(),
            bbox: BBox {
                lat_min: 43.60,
                lat_max: 43.76,
                lon_min: -79.50,
                lon_max: -79.34,
            },
            density_map: radial_density(16, 16, 0.2, 0.75),
            bands,
            years: (2019, 2023),
        },
    ]
}

pub fn builtin_profile(name: &str) -> Option<RegionProfile> {
    builtin_profiles().into_iter().find(|p| p.name == name)
}
