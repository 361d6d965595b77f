//! CSV and JSON stage files.
//!
//! Every reader maps an absent file to [`Error::MissingInput`] so callers can
//! tell a missing dependency from a malformed one. Floats are written in
//! shortest round-trip form, so a written file reads back bit-identically.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{CorrelationEntry, FeaturePanel, KpiCell, PanelRow};
use crate::kpi::{parse_column, Kpi, KpiVector};
use crate::models::Metrics;
use crate::quality::{CleanseAction, CleanseLogEntry, SeriesKey};
use crate::spatial::TileId;
use crate::transfer::TransferOutcome;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })
}

/// Fails with [`Error::MissingInput`] unless `path` is an existing file.
pub fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingInput(path.to_path_buf()))
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a header-only file when `rows` is empty.
pub fn write_rows_with_header<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    if !rows.is_empty() {
        return write_rows(path, rows);
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Schema(format!("{}: {e}", path.display()))))
        .collect()
}

/// Header and raw string records, for callers that echo values verbatim.
pub fn read_records(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let header = r.headers()?.iter().map(str::to_string).collect();
    let records = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, records))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = open(path)?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row of `kpis.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiRow {
    pub tile: TileId,
    pub band: String,
    pub window: usize,
    pub traffic_volume: f64,
    pub latency_ratio: f64,
    pub tx_rx_ratio: f64,
    pub norm_connections: f64,
    pub signal_strength: f64,
    pub jitter_variability: f64,
    pub sum_throughput: f64,
    pub weight: f64,
    pub imputed: bool,
}

impl From<&KpiCell> for KpiRow {
    fn from(c: &KpiCell) -> Self {
        let k = c.kpis;
        KpiRow {
            tile: c.tile,
            band: c.band.clone(),
            window: c.window,
            traffic_volume: k.traffic_volume,
            latency_ratio: k.latency_ratio,
            tx_rx_ratio: k.tx_rx_ratio,
            norm_connections: k.norm_connections,
            signal_strength: k.signal_strength,
            jitter_variability: k.jitter_variability,
            sum_throughput: k.sum_throughput,
            weight: c.weight,
            imputed: c.imputed,
        }
    }
}

impl From<KpiRow> for KpiCell {
    fn from(r: KpiRow) -> Self {
        KpiCell {
            tile: r.tile,
            band: r.band,
            window: r.window,
            kpis: KpiVector {
                traffic_volume: r.traffic_volume,
                latency_ratio: r.latency_ratio,
                tx_rx_ratio: r.tx_rx_ratio,
                norm_connections: r.norm_connections,
                signal_strength: r.signal_strength,
                jitter_variability: r.jitter_variability,
                sum_throughput: r.sum_throughput,
            },
            weight: r.weight,
            imputed: r.imputed,
        }
    }
}

pub fn write_kpis(path: &Path, cells: &[KpiCell]) -> Result<()> {
    write_rows(path, cells.iter().map(KpiRow::from))
}

pub fn read_kpis(path: &Path) -> Result<Vec<KpiCell>> {
    Ok(read_rows::<KpiRow>(path)?.into_iter().map(KpiCell::from).collect())
}

/// One row of `cleansing_log.csv`. `key` is `tile:band:field`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanseLogRow {
    pub key: String,
    pub window: usize,
    pub action: CleanseAction,
    pub before: Option<f64>,
    pub after: f64,
}

impl From<&CleanseLogEntry> for CleanseLogRow {
    fn from(e: &CleanseLogEntry) -> Self {
        CleanseLogRow {
            key: e.key.to_string(),
            window: e.window,
            action: e.action,
            before: e.before,
            after: e.after,
        }
    }
}

impl TryFrom<CleanseLogRow> for CleanseLogEntry {
    type Error = Error;

    fn try_from(r: CleanseLogRow) -> Result<Self> {
        let mut parts = r.key.splitn(3, ':');
        let (Some(tile), Some(band), Some(field)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Schema(format!("malformed cleanse key `{}`", r.key)));
        };
        Ok(CleanseLogEntry {
            key: SeriesKey {
                tile: tile.parse()?,
                band: band.to_string(),
                field: field.to_string(),
            },
            window: r.window,
            action: r.action,
            before: r.before,
            after: r.after,
        })
    }
}

pub fn write_cleanse_log(path: &Path, log: &[CleanseLogEntry]) -> Result<()> {
    let rows: Vec<CleanseLogRow> = log.iter().map(CleanseLogRow::from).collect();
    write_rows_with_header(path, &["key", "window", "action", "before", "after"], &rows)
}

pub fn read_cleanse_log(path: &Path) -> Result<Vec<CleanseLogEntry>> {
    read_rows::<CleanseLogRow>(path)?.into_iter().map(TryInto::try_into).collect()
}

/// `panel.csv`: `tile, window, <lag columns>, target`, unstandardized.
pub fn write_panel(path: &Path, panel: &FeaturePanel) -> Result<()> {
    if panel.standardization.is_some() {
        return Err(Error::Schema("panel.csv holds unstandardized features".into()));
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["tile".to_string(), "window".to_string()];
    header.extend(panel.columns.iter().cloned());
    header.push("target".into());
    w.write_record(&header)?;
    for r in &panel.rows {
        let mut rec = vec![r.tile.to_string(), r.window.to_string()];
        rec.extend(r.features.iter().map(|v| float_text(*v)));
        rec.push(float_text(r.target));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Shortest round-trip text, with exponents for very large or small values.
fn float_text(v: f64) -> String {
    format!("{v:?}")
}

pub fn read_panel(path: &Path) -> Result<FeaturePanel> {
    let (header, records) = read_records(path)?;
    let schema = |m: String| Error::Schema(format!("{}: {m}", path.display()));
    if header.len() < 4 || header[0] != "tile" || header[1] != "window" || header[header.len() - 1] != "target" {
        return Err(schema("expected columns tile, window, <features>, target".into()));
    }
    let columns: Vec<String> = header[2..header.len() - 1].to_vec();
    let mut lags = Vec::new();
    for c in &columns {
        let (_, lag) = parse_column(c).ok_or_else(|| schema(format!("unknown feature column `{c}`")))?;
        if !lags.contains(&lag) {
            lags.push(lag);
        }
    }
    lags.sort_unstable();
    let num = |s: &str| s.parse::<f64>().map_err(|_| schema(format!("not a number: `{s}`")));
    let rows = records
        .iter()
        .map(|rec| {
            if rec.len() != header.len() {
                return Err(schema("ragged row".into()));
            }
            Ok(PanelRow {
                tile: rec[0].parse()?,
                window: rec[1].parse().map_err(|_| schema(format!("bad window `{}`", rec[1])))?,
                features: rec[2..rec.len() - 1].iter().map(|s| num(s)).collect::<Result<_>>()?,
                target: num(&rec[rec.len() - 1])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeaturePanel {
        lags,
        columns,
        rows,
        standardization: None,
    })
}

/// One row of `correlations.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub kpi: Kpi,
    pub lag: usize,
    pub pearson: f64,
    pub n: usize,
}

impl From<&CorrelationEntry> for CorrelationRow {
    fn from(e: &CorrelationEntry) -> Self {
        CorrelationRow {
            kpi: e.kpi,
            lag: e.lag,
            pearson: e.pearson,
            n: e.n,
        }
    }
}

/// One row of `acf_pacf.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcfRow {
    pub lag: usize,
    pub acf: f64,
    pub pacf: f64,
}

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub scenario: String,
    pub rmse: f64,
    pub nrmse: f64,
    pub r2: f64,
    pub accuracy: f64,
}

impl MetricRow {
    pub fn new(model: &str, scenario: &str, m: &Metrics) -> Self {
        MetricRow {
            model: model.to_string(),
            scenario: scenario.to_string(),
            rmse: m.rmse,
            nrmse: m.nrmse,
            r2: m.r2,
            accuracy: m.accuracy,
        }
    }
}

/// One row of `predictions.csv`: a test-row prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub scenario: String,
    pub model: String,
    pub tile: TileId,
    pub window: usize,
    pub actual: f64,
    pub predicted: f64,
}

/// One row of `transfer_report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub source: String,
    pub target: String,
    pub target_fraction: f64,
    pub seed: u64,
    pub nrmse_with: f64,
    pub nrmse_without: f64,
    pub reduction: f64,
}

impl From<&TransferOutcome> for TransferRow {
    fn from(o: &TransferOutcome) -> Self {
        TransferRow {
            source: o.source_region.clone(),
            target: o.target_region.clone(),
            target_fraction: o.target_fraction,
            seed: o.seed,
            nrmse_with: o.metrics_with_transfer.nrmse,
            nrmse_without: o.metrics_without_transfer.nrmse,
            reduction: o.relative_nrmse_reduction,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_file_is_missing_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("panel.csv");
        assert!(matches!(read_panel(&p), Err(Error::MissingInput(q)) if q == p));
        assert!(matches!(require(&p), Err(Error::MissingInput(_))));
    }

    #[test]
    fn panel_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("panel.csv");
        let panel = FeaturePanel {
            lags: vec![0, 1],
            columns: vec!["traffic_volume_lag0".into(), "traffic_volume_lag1".into()],
            rows: vec![
                PanelRow {
                    tile: TileId::new(0, 1),
                    window: 2,
                    features: vec![0.1 + 0.2, 1e-300],
                    target: 123.456789012345,
                },
                PanelRow {
                    tile: TileId::new(4, 0),
                    window: 3,
                    features: vec![-2.5e12, std::f64::consts::PI],
                    target: -0.0,
                },
            ],
            standardization: None,
        };
        write_panel(&p, &panel).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("tile,window,traffic_volume_lag0,traffic_volume_lag1,target\nr0c1,2,"));
        let back = read_panel(&p).unwrap();
        assert_eq!(back, panel);
    }

    #[test]
    fn kpi_and_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cells = vec![KpiCell {
            tile: TileId::new(1, 2),
            band: "n78".into(),
            window: 5,
            kpis: KpiVector::from_array([1.0, 0.5, 0.25, 3.0, -101.5, 2.0, 4.0e9]),
            weight: 17.0,
            imputed: false,
        }];
        write_kpis(&dir.path().join("k.csv"), &cells).unwrap();
        assert_eq!(read_kpis(&dir.path().join("k.csv")).unwrap(), cells);

        let log = vec![CleanseLogEntry {
            key: SeriesKey {
                tile: TileId::new(1, 2),
                band: "B4".into(),
                field: "traffic_volume".into(),
            },
            window: 3,
            action: CleanseAction::Interpolated,
            before: None,
            after: 4.5,
        }];
        let p = dir.path().join("log.csv");
        write_cleanse_log(&p, &log).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "key,window,action,before,after\nr1c2:B4:traffic_volume,3,interpolated,,4.5\n"
        );
        assert_eq!(read_cleanse_log(&p).unwrap(), log);
        write_cleanse_log(&p, &[]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "key,window,action,before,after\n");
    }

    #[test]
    fn unknown_panel_column_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("panel.csv");
        write_text(&p, "tile,window,mystery_lag0,target\nr0c0,2,1.0,3.0\n").unwrap();
        assert!(matches!(read_panel(&p), Err(Error::Schema(_))));
    }
}
