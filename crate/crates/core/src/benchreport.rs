//! Reference-benchmark comparison and the report bundle.
//!
//! The bundle is written from typed inputs once; plot series and the summary
//! are then assembled from the written CSV text, so every number they show
//! appears verbatim in a machine-readable file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{self, AcfRow, CorrelationRow, MetricRow, TransferRow};

/// Yearly spectrum estimates of the four reference models, MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItuBenchmarks {
    pub vanilla_high: f64,
    pub vanilla_low: f64,
    pub modernized_high: f64,
    pub modernized_low: f64,
    pub reference_year: i32,
}

impl ItuBenchmarks {
    pub fn validate(&self) -> Result<()> {
        for kind in BenchmarkKind::ALL {
            let v = self.get(kind);
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "benchmark {} must be a positive MHz value, got {v}",
                    kind.name()
                )));
            }
        }
        if self.vanilla_high < self.vanilla_low || self.modernized_high < self.modernized_low {
            return Err(Error::Config(
                "high-density benchmarks must not be below their low-density counterparts".into(),
            ));
        }
        Ok(())
    }

    pub fn get(&self, kind: BenchmarkKind) -> f64 {
        match kind {
            BenchmarkKind::VanillaHigh => self.vanilla_high,
            BenchmarkKind::VanillaLow => self.vanilla_low,
            BenchmarkKind::ModernizedHigh => self.modernized_high,
            BenchmarkKind::ModernizedLow => self.modernized_low,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    VanillaHigh,
    VanillaLow,
    ModernizedHigh,
    ModernizedLow,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 4] = [
        BenchmarkKind::VanillaHigh,
        BenchmarkKind::VanillaLow,
        BenchmarkKind::ModernizedHigh,
        BenchmarkKind::ModernizedLow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::VanillaHigh => "vanilla_high",
            BenchmarkKind::VanillaLow => "vanilla_low",
            BenchmarkKind::ModernizedHigh => "modernized_high",
            BenchmarkKind::ModernizedLow => "modernized_low",
        }
    }
}

/// Where an actual value sits relative to a benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Above,
    AtBenchmark,
    /// Less than 20% below.
    #[serde(rename = "below_0_20")]
    Below0To20,
    /// 20% to 40% below, both ends included.
    #[serde(rename = "below_20_40")]
    Below20To40,
    /// More than 40% below.
    #[serde(rename = "below_over_40")]
    BelowOver40,
}

/// `(actual - benchmark) / benchmark`.
pub fn deviation(actual: f64, benchmark: f64) -> f64 {
    (actual - benchmark) / benchmark
}

pub fn classify(deviation: f64) -> Regime {
    if deviation > 0.0 {
        Regime::Above
    } else if deviation == 0.0 {
        Regime::AtBenchmark
    } else if deviation > -0.2 {
        Regime::Below0To20
    } else if deviation >= -0.4 {
        Regime::Below20To40
    } else {
        Regime::BelowOver40
    }
}

/// One (year, benchmark) line of `benchmark_comparison.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub region: String,
    pub year: i32,
    pub actual_mhz: f64,
    pub predicted_mhz: Option<f64>,
    pub benchmark: BenchmarkKind,
    pub benchmark_mhz: f64,
    pub deviation: f64,
    pub predicted_deviation: Option<f64>,
    /// The benchmark over-predicts demand.
    pub actual_below_benchmark: bool,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchmarkComparison {
    pub rows: Vec<BenchmarkRow>,
}

/// Deviation of yearly actual (and, where available, predicted) demand from
/// every benchmark, ordered by year then benchmark.
pub fn compare_benchmarks(
    region: &str,
    actuals: &BTreeMap<i32, f64>,
    predictions: &BTreeMap<i32, f64>,
    bench: &ItuBenchmarks,
) -> Result<BenchmarkComparison> {
    bench.validate()?;
    if actuals.is_empty() {
        return Err(Error::InsufficientData("benchmark comparison needs at least one year of actuals".into()));
    }
    if let Some(y) = predictions.keys().find(|y| !actuals.contains_key(y)) {
        return Err(Error::Schema(format!("prediction for year {y} has no actual")));
    }
    let mut rows = Vec::with_capacity(actuals.len() * 4);
    for (&year, &actual) in actuals {
        let predicted = predictions.get(&year).copied();
        for kind in BenchmarkKind::ALL {
            let b = bench.get(kind);
            let d = deviation(actual, b);
            rows.push(BenchmarkRow {
                region: region.to_string(),
                year,
                actual_mhz: actual,
                predicted_mhz: predicted,
                benchmark: kind,
                benchmark_mhz: b,
                deviation: d,
                predicted_deviation: predicted.map(|p| deviation(p, b)),
                actual_below_benchmark: actual < b,
                regime: classify(d),
            });
        }
    }
    Ok(BenchmarkComparison { rows })
}

/// Mean of the values falling in each year.
pub fn yearly_means(values: impl IntoIterator<Item = (i32, f64)>) -> BTreeMap<i32, f64> {
    let mut acc: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for (y, v) in values {
        let e = acc.entry(y).or_default();
        e.0 += v;
        e.1 += 1;
    }
    acc.into_iter().map(|(y, (s, n))| (y, s / n as f64)).collect()
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CORRELATIONS_FILE: &str = "correlations.csv";
pub const BENCHMARK_FILE: &str = "benchmark_comparison.csv";
pub const TRANSFER_FILE: &str = "transfer_report.csv";
pub const PLOT_LAG_CORRELATION: &str = "plots/lag_correlation.csv";
pub const PLOT_ACF_PACF: &str = "plots/acf_pacf.csv";
pub const PLOT_MODEL_ACCURACY: &str = "plots/model_accuracy.csv";
pub const PLOT_BENCHMARKS: &str = "plots/benchmark_comparison.csv";
pub const PLOT_TRANSFER: &str = "plots/transfer_gain.csv";

/// Every file a bundle may hold besides the manifest.
pub const BUNDLE_FILES: [&str; 10] = [
    SUMMARY_FILE,
    METRICS_FILE,
    CORRELATIONS_FILE,
    BENCHMARK_FILE,
    TRANSFER_FILE,
    PLOT_LAG_CORRELATION,
    PLOT_ACF_PACF,
    PLOT_MODEL_ACCURACY,
    PLOT_BENCHMARKS,
    PLOT_TRANSFER,
];

/// Inputs of one report; empty parts are omitted from the bundle.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReportInputs<'a> {
    /// Region the correlation and ACF inputs describe.
    pub region: &'a str,
    pub metrics: &'a [MetricRow],
    pub correlations: &'a [CorrelationRow],
    pub acf: &'a [AcfRow],
    pub benchmarks: Option<&'a BenchmarkComparison>,
    pub transfer: &'a [TransferRow],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Omission {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    /// Written files, sorted by path.
    pub files: Vec<ManifestEntry>,
    pub omitted: Vec<Omission>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

struct Bundle<'a> {
    dir: &'a Path,
    written: Vec<String>,
    omitted: Vec<Omission>,
}

impl Bundle<'_> {
    fn omit(&mut self, path: &str, reason: &str) {
        self.omitted.push(Omission {
            path: path.to_string(),
            reason: reason.to_string(),
        });
    }

    fn plot(&mut self, path: &str, header: [&str; 3], points: &[[String; 3]]) -> Result<()> {
        let file = self.dir.join(path);
        let mut rows: Vec<Vec<&str>> = vec![header.to_vec()];
        rows.extend(points.iter().map(|p| p.iter().map(String::as_str).collect()));
        write_records(&file, &rows)?;
        self.written.push(path.to_string());
        Ok(())
    }

    fn csv<T: Serialize>(&mut self, path: &str, rows: &[T]) -> Result<(Vec<String>, Vec<Vec<String>>)> {
        let file = self.dir.join(path);
        io::write_rows(&file, rows)?;
        self.written.push(path.to_string());
        io::read_records(&file)
    }
}

fn write_records(path: &Path, rows: &[Vec<&str>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn column(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Schema(format!("report input lacks column `{name}`")))
}

/// Writes the report bundle into `out_dir` and returns its manifest, which is
/// also written as `manifest.json`. Files of earlier bundles that this one
/// omits are removed.
pub fn emit_report(inputs: &ReportInputs, out_dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for f in BUNDLE_FILES.iter().chain(std::iter::once(&MANIFEST_FILE)) {
        let p = out_dir.join(f);
        if p.exists() {
            fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    let mut b = Bundle {
        dir: out_dir,
        written: Vec::new(),
        omitted: Vec::new(),
    };
    let mut summary = String::from("demandcast report\n");

    if inputs.metrics.is_empty() {
        b.omit(METRICS_FILE, "no model metrics");
        b.omit(PLOT_MODEL_ACCURACY, "no model metrics");
    } else {
        let (h, recs) = b.csv(METRICS_FILE, inputs.metrics)?;
        let (m, s, a, n) = (column(&h, "model")?, column(&h, "scenario")?, column(&h, "accuracy")?, column(&h, "nrmse")?);
        summary.push_str("\nmodel accuracy on held-out windows (scenario, model, accuracy, nrmse)\n");
        for r in &recs {
            let _ = writeln!(summary, "  {} {} {} {}", r[s], r[m], r[a], r[n]);
        }
        let points: Vec<[String; 3]> = recs.iter().map(|r| [r[s].clone(), r[m].clone(), r[a].clone()]).collect();
        b.plot(PLOT_MODEL_ACCURACY, ["series", "model", "accuracy"], &points)?;
    }

    if inputs.correlations.is_empty() {
        b.omit(CORRELATIONS_FILE, "no correlation input");
        b.omit(PLOT_LAG_CORRELATION, "no correlation input");
    } else {
        let (h, recs) = b.csv(CORRELATIONS_FILE, inputs.correlations)?;
        let (k, l, p) = (column(&h, "kpi")?, column(&h, "lag")?, column(&h, "pearson")?);
        let mut ranked: Vec<(usize, f64)> = inputs
            .correlations
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.pearson.abs()))
            .collect();
        ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        let _ = writeln!(summary, "\nstrongest KPI correlations with the proxy in {} (kpi, lag, pearson)", inputs.region);
        for &(i, _) in ranked.iter().take(5) {
            let _ = writeln!(summary, "  {} {} {}", recs[i][k], recs[i][l], recs[i][p]);
        }
        let points: Vec<[String; 3]> = recs.iter().map(|r| [r[k].clone(), r[l].clone(), r[p].clone()]).collect();
        b.plot(PLOT_LAG_CORRELATION, ["series", "lag_quarters", "pearson_r"], &points)?;
    }

    if inputs.acf.is_empty() {
        b.omit(PLOT_ACF_PACF, "no autocorrelation input");
    } else {
        let mut points: Vec<[String; 3]> = inputs
            .acf
            .iter()
            .map(|r| ["acf".into(), r.lag.to_string(), format!("{:?}", r.acf)])
            .collect();
        points.extend(
            inputs
                .acf
                .iter()
                .map(|r| ["pacf".into(), r.lag.to_string(), format!("{:?}", r.pacf)]),
        );
        b.plot(PLOT_ACF_PACF, ["series", "lag_quarters", "coefficient"], &points)?;
    }

    match inputs.benchmarks.filter(|c| !c.rows.is_empty()) {
        None => {
            b.omit(BENCHMARK_FILE, "no benchmark comparison");
            b.omit(PLOT_BENCHMARKS, "no benchmark comparison");
        }
        Some(cmp) => {
            let (h, recs) = b.csv(BENCHMARK_FILE, &cmp.rows)?;
            let (y, a, p, k, bm, d, rg) = (
                column(&h, "year")?,
                column(&h, "actual_mhz")?,
                column(&h, "predicted_mhz")?,
                column(&h, "benchmark")?,
                column(&h, "benchmark_mhz")?,
                column(&h, "deviation")?,
                column(&h, "regime")?,
            );
            summary.push_str("\nactual demand against benchmarks (year, benchmark, actual MHz, deviation, regime)\n");
            let mut points = Vec::new();
            let mut seen_year = None;
            for r in &recs {
                let _ = writeln!(summary, "  {} {} {} {} {}", r[y], r[k], r[a], r[d], r[rg]);
                if seen_year.as_ref() != Some(&r[y]) {
                    seen_year = Some(r[y].clone());
                    points.push(["actual".into(), r[y].clone(), r[a].clone()]);
                    if !r[p].is_empty() {
                        points.push(["predicted".into(), r[y].clone(), r[p].clone()]);
                    }
                }
                points.push([r[k].clone(), r[y].clone(), r[bm].clone()]);
            }
            b.plot(PLOT_BENCHMARKS, ["series", "year", "bandwidth_mhz"], &points)?;
        }
    }

    if inputs.transfer.is_empty() {
        b.omit(TRANSFER_FILE, "no transfer outcomes");
        b.omit(PLOT_TRANSFER, "no transfer outcomes");
    } else {
        let (h, recs) = b.csv(TRANSFER_FILE, inputs.transfer)?;
        let (src, tgt, seed, w, wo, red) = (
            column(&h, "source")?,
            column(&h, "target")?,
            column(&h, "seed")?,
            column(&h, "nrmse_with")?,
            column(&h, "nrmse_without")?,
            column(&h, "reduction")?,
        );
        summary.push_str("\ntransfer (source, target, seed, nrmse with, nrmse without, reduction)\n");
        let mut points = Vec::new();
        for r in &recs {
            let _ = writeln!(summary, "  {} {} {} {} {} {}", r[src], r[tgt], r[seed], r[w], r[wo], r[red]);
            points.push(["with_transfer".into(), r[seed].clone(), r[w].clone()]);
        }
        points.extend(recs.iter().map(|r| ["without_transfer".into(), r[seed].clone(), r[wo].clone()]));
        b.plot(PLOT_TRANSFER, ["series", "seed", "nrmse"], &points)?;
    }

    if !b.omitted.is_empty() {
        summary.push_str("\nomitted\n");
        for o in &b.omitted {
            let _ = writeln!(summary, "  {}: {}", o.path, o.reason);
        }
    }
    io::write_text(&out_dir.join(SUMMARY_FILE), &summary)?;
    b.written.push(SUMMARY_FILE.to_string());

    let mut paths = b.written;
    paths.sort();
    let files = paths
        .into_iter()
        .map(|p| {
            let full = out_dir.join(&p);
            let bytes = fs::metadata(&full).map_err(|e| Error::io(&full, e))?.len();
            Ok(ManifestEntry {
                sha256: sha256_file(&full)?,
                path: p,
                bytes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut omitted = b.omitted;
    omitted.sort_by(|x, y| x.path.cmp(&y.path));
    let manifest = Manifest { files, omitted };
    io::write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bench() -> ItuBenchmarks {
        ItuBenchmarks {
            vanilla_high: 100.0,
            vanilla_low: 80.0,
            modernized_high: 90.0,
            modernized_low: 70.0,
            reference_year: 2023,
        }
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(deviation(60.0, 100.0), -0.4);
        assert_eq!(classify(deviation(60.0, 100.0)), Regime::Below20To40);
        assert_eq!(deviation(100.0, 100.0), 0.0);
        assert_eq!(classify(0.0), Regime::AtBenchmark);
        assert_eq!(deviation(85.0, 100.0), -0.15);
        assert_eq!(classify(-0.15), Regime::Below0To20);
        assert_eq!(classify(-0.2), Regime::Below20To40);
        assert_eq!(classify(-0.41), Regime::BelowOver40);
        assert_eq!(classify(0.01), Regime::Above);
    }

    #[test]
    fn benchmark_validation() {
        let mut b = bench();
        assert!(b.validate().is_ok());
        b.modernized_low = 0.0;
        assert!(matches!(b.validate(), Err(Error::Config(_))));
        let mut b = bench();
        b.vanilla_low = 120.0;
        assert!(b.validate().is_err());
    }

    #[test]
    fn comparison_rows() {
        let actuals = BTreeMap::from([(2022, 60.0), (2023, 85.0)]);
        let preds = BTreeMap::from([(2023, 90.0)]);
        let c = compare_benchmarks("r", &actuals, &preds, &bench()).unwrap();
        assert_eq!(c.rows.len(), 8);
        let first = &c.rows[0];
        assert_eq!((first.year, first.benchmark, first.deviation), (2022, BenchmarkKind::VanillaHigh, -0.4));
        assert!(first.actual_below_benchmark);
        assert_eq!(first.predicted_mhz, None);
        let last = &c.rows[7];
        assert_eq!(last.predicted_deviation, Some(deviation(90.0, 70.0)));
        assert!(!last.actual_below_benchmark);
        assert!(compare_benchmarks("r", &BTreeMap::new(), &BTreeMap::new(), &bench()).is_err());
    }

    #[test]
    fn yearly_mean_groups() {
        let m = yearly_means([(2020, 1.0), (2020, 3.0), (2021, 5.0)]);
        assert_eq!(m, BTreeMap::from([(2020, 2.0), (2021, 5.0)]));
    }
}
