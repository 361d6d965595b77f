//! Stage orchestration.
//!
//! Each stage reads its declared input files under the output directory and
//! writes its declared outputs, so any stage can be rerun on its own. The
//! in-memory helpers here are shared by the stages and by callers that skip
//! the files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::benchreport::{compare_benchmarks, emit_report, yearly_means, BenchmarkComparison, ReportInputs};
use crate::config::{RunConfig, SplitConfig, TransferRunConfig};
use crate::error::{Error, Result};
use crate::features::{acf_pacf, build_panel, correlation_report, CorrelationReport, FeaturePanel, KpiCell};
use crate::io::{self, AcfRow, CorrelationRow, MetricRow, PredictionRow, TransferRow};
use crate::models::{evaluate, fit_model, temporal_split, trailing_split_windows, Metrics, ModelArtifact, NamedModel};
use crate::quality::{cleanse_cells, CleanseLogEntry, CleansePolicy};
use crate::rng::derive_seed;
use crate::spatial::{aggregate, aggregate_proxy, Aggregation, GridSpec, ProxyTarget, WindowSpec};
use crate::synthgen::{generate_region, CouplingSpec, GeneratedRegion, RegionProfile};
use crate::transfer::{compare_transfer, train_source, SourceModel, TransferOutcome};

/// Seed of one region under a run's master seed.
pub fn region_seed(master: u64, region: &str) -> u64 {
    // FNV-1a keeps the mapping stable across builds and platforms.
    let name_hash = region
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3));
    derive_seed(master, &[name_hash])
}

/// Everything one region produces up to the feature panel.
#[derive(Debug, Clone)]
pub struct RegionData {
    pub generated: GeneratedRegion,
    pub grid: GridSpec,
    pub windows: WindowSpec,
    pub aggregation: Aggregation,
    pub proxy: Vec<ProxyTarget>,
    pub kpis: Vec<KpiCell>,
    pub cleanse_log: Vec<CleanseLogEntry>,
    pub panel: FeaturePanel,
}

/// Generates, aggregates, cleanses and panels one region in memory.
pub fn prepare_region(
    profile: &RegionProfile,
    coupling: &CouplingSpec,
    tile_size_deg: f64,
    policy: &CleansePolicy,
    lags: &[usize],
    seed: u64,
) -> Result<RegionData> {
    let generated = generate_region(profile, coupling, region_seed(seed, &profile.name))?;
    let grid = GridSpec::covering(profile.bbox, tile_size_deg)?;
    let windows = profile.windows();
    let aggregation = aggregate(&generated.samples, &grid, &windows)?;
    let proxy = aggregate_proxy(&generated.regulatory, &grid, &windows)?;
    let (kpis, cleanse_log) = cleanse_cells(&aggregation.cells, windows.count, policy)?;
    let panel = build_panel(&kpis, &proxy, lags)?;
    Ok(RegionData {
        generated,
        grid,
        windows,
        aggregation,
        proxy,
        kpis,
        cleanse_log,
        panel,
    })
}

/// [`prepare_region`] with the run configuration's settings.
pub fn prepare_configured(config: &RunConfig, profile: &RegionProfile, seed: u64) -> Result<RegionData> {
    prepare_region(
        profile,
        &config.coupling,
        config.grid.tile_size_deg,
        &config.cleanse,
        &config.lags,
        seed,
    )
}

/// One fitted model with its held-out score and predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub artifact: ModelArtifact,
    pub metrics: Metrics,
    pub predictions: Vec<PredictionRow>,
}

/// Fits every model on the panel's leading windows and scores it on the
/// trailing `split.test_windows`.
pub fn train_models(
    scenario: &str,
    panel: &FeaturePanel,
    models: &[NamedModel],
    split: &SplitConfig,
    seed: u64,
) -> Result<Vec<TrainedModel>> {
    let (train_w, test_w) = trailing_split_windows(panel, split.test_windows)?;
    let s = temporal_split(panel, &train_w, &test_w, split.season_period)?;
    models
        .iter()
        .map(|m| {
            let predictor = fit_model(&m.spec, &s.train.x, &s.train.y, seed)?;
            let pred = predictor.predict(&s.test.x);
            let metrics = evaluate(&s.test.y, &pred)?;
            let predictions = s
                .test
                .keys
                .iter()
                .zip(s.test.y.iter().zip(&pred))
                .map(|(&(tile, window), (&actual, &predicted))| PredictionRow {
                    scenario: scenario.to_string(),
                    model: m.name.clone(),
                    tile,
                    window,
                    actual,
                    predicted,
                })
                .collect();
            Ok(TrainedModel {
                artifact: ModelArtifact {
                    name: m.name.clone(),
                    spec: m.spec.clone(),
                    features: s.columns.clone(),
                    predictor,
                    standardization: Some(s.train_stats.clone()),
                    train_windows: train_w.clone(),
                    seed,
                },
                metrics,
                predictions,
            })
        })
        .collect()
}

/// Trains the source model once, then compares transfer against scratch
/// training on `repeats` target subsamples seeded `seed, seed + 1, ...`.
pub fn run_transfer(
    source: &FeaturePanel,
    target: &FeaturePanel,
    t: &TransferRunConfig,
    split: &SplitConfig,
    seed: u64,
    repeats: usize,
) -> Result<(SourceModel, Vec<TransferOutcome>)> {
    let config = t.transfer_config();
    config.validate()?;
    let (src_train, src_test) = trailing_split_windows(source, split.test_windows)?;
    let src = train_source(source, &t.source_model, &src_train, &src_test, split.season_period, seed)?;
    let (train_w, test_w) = trailing_split_windows(target, split.test_windows)?;
    let outcomes = (0..repeats as u64)
        .map(|k| {
            compare_transfer(
                target,
                &src.artifact,
                &config,
                &train_w,
                &test_w,
                split.season_period,
                seed.wrapping_add(k),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((src, outcomes))
}

/// Autocorrelation of the region's mean proxy series.
pub fn proxy_autocorrelation(proxy: &[ProxyTarget], max_lag: usize) -> Result<Vec<AcfRow>> {
    let mut by_window: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for p in proxy {
        let e = by_window.entry(p.window).or_default();
        e.0 += p.deployed_bw_mhz;
        e.1 += 1;
    }
    let series: Vec<f64> = by_window.values().map(|(s, n)| s / *n as f64).collect();
    let max_lag = max_lag.min(series.len().saturating_sub(2));
    let (acf, pacf) = acf_pacf(&series, max_lag)?;
    Ok((0..=max_lag)
        .map(|k| AcfRow {
            lag: k,
            acf: acf[k],
            pacf: pacf[k],
        })
        .collect())
}

/// Pipeline stages in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Gen,
    Aggregate,
    Cleanse,
    Featurize,
    Correlate,
    Train,
    Transfer,
    Benchmark,
    Report,
    All,
}

impl Stage {
    pub const SEQUENCE: [Stage; 9] = [
        Stage::Gen,
        Stage::Aggregate,
        Stage::Cleanse,
        Stage::Featurize,
        Stage::Correlate,
        Stage::Train,
        Stage::Transfer,
        Stage::Benchmark,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Gen => "gen",
            Stage::Aggregate => "aggregate",
            Stage::Cleanse => "cleanse",
            Stage::Featurize => "featurize",
            Stage::Correlate => "correlate",
            Stage::Train => "train",
            Stage::Transfer => "transfer",
            Stage::Benchmark => "benchmark",
            Stage::Report => "report",
            Stage::All => "all",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::SEQUENCE
            .into_iter()
            .chain(std::iter::once(Stage::All))
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// File locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn region_file(&self, region: &str, file: &str) -> PathBuf {
        self.root.join("regions").join(region).join(file)
    }

    pub fn model_file(&self, region: &str, model: &str) -> PathBuf {
        self.root.join("models").join(region).join(format!("{model}.json"))
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }

    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions.csv")
    }

    pub fn source_model(&self) -> PathBuf {
        self.root.join("transfer").join("source_model.json")
    }

    pub fn transfer_report(&self) -> PathBuf {
        self.root.join("transfer").join("transfer_report.csv")
    }

    pub fn benchmark(&self) -> PathBuf {
        self.root.join("benchmark_comparison.csv")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn run_meta(&self) -> PathBuf {
        self.root.join("run_meta.json")
    }
}

/// Contents of `run_meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub stage: Stage,
    pub config_hash: String,
    pub seed: u64,
    pub demandcast_version: String,
    pub regions: Vec<String>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

struct StageRun<'a> {
    config: &'a RunConfig,
    layout: &'a Layout,
    profiles: Vec<RegionProfile>,
    written: Vec<PathBuf>,
}

impl StageRun<'_> {
    fn wrote(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    fn region_inputs(&self, files: &[&str]) -> Result<()> {
        for p in &self.profiles {
            for f in files {
                io::require(&self.layout.region_file(&p.name, f))?;
            }
        }
        Ok(())
    }

    fn gen(&mut self) -> Result<()> {
        for p in self.profiles.clone() {
            let g = generate_region(&p, &self.config.coupling, region_seed(self.config.seed, &p.name))?;
            let samples = self.layout.region_file(&p.name, "samples.csv");
            io::write_rows(&samples, &g.samples)?;
            self.wrote(samples);
            let regulatory = self.layout.region_file(&p.name, "regulatory.csv");
            io::write_rows(&regulatory, &g.regulatory)?;
            self.wrote(regulatory);
            log::info!("{}: {} samples, {} filings", p.name, g.samples.len(), g.regulatory.len());
        }
        Ok(())
    }

    fn aggregate(&mut self) -> Result<()> {
        self.region_inputs(&["samples.csv", "regulatory.csv"])?;
        for p in self.profiles.clone() {
            let samples = io::read_rows(&self.layout.region_file(&p.name, "samples.csv"))?;
            let regulatory = io::read_rows(&self.layout.region_file(&p.name, "regulatory.csv"))?;
            let grid = GridSpec::covering(p.bbox, self.config.grid.tile_size_deg)?;
            let windows = p.windows();
            let agg = aggregate(&samples, &grid, &windows)?;
            if agg.dropped_out_of_extent + agg.dropped_out_of_horizon > 0 {
                log::warn!(
                    "{}: dropped {} samples outside the grid and {} outside the horizon",
                    p.name,
                    agg.dropped_out_of_extent,
                    agg.dropped_out_of_horizon
                );
            }
            let proxy = aggregate_proxy(&regulatory, &grid, &windows)?;
            let cells = self.layout.region_file(&p.name, "cells.csv");
            io::write_rows(&cells, &agg.cells)?;
            self.wrote(cells);
            let proxy_path = self.layout.region_file(&p.name, "proxy.csv");
            io::write_rows(&proxy_path, &proxy)?;
            self.wrote(proxy_path);
        }
        Ok(())
    }

    fn cleanse(&mut self) -> Result<()> {
        self.region_inputs(&["cells.csv"])?;
        for p in self.profiles.clone() {
            let cells = io::read_rows(&self.layout.region_file(&p.name, "cells.csv"))?;
            let (kpis, log) = cleanse_cells(&cells, p.windows().count, &self.config.cleanse)?;
            let kpi_path = self.layout.region_file(&p.name, "kpis.csv");
            io::write_kpis(&kpi_path, &kpis)?;
            self.wrote(kpi_path);
            let log_path = self.layout.region_file(&p.name, "cleansing_log.csv");
            io::write_cleanse_log(&log_path, &log)?;
            self.wrote(log_path);
        }
        Ok(())
    }

    fn featurize(&mut self) -> Result<()> {
        self.region_inputs(&["kpis.csv", "proxy.csv"])?;
        for p in self.profiles.clone() {
            let kpis = io::read_kpis(&self.layout.region_file(&p.name, "kpis.csv"))?;
            let proxy: Vec<ProxyTarget> = io::read_rows(&self.layout.region_file(&p.name, "proxy.csv"))?;
            let panel = build_panel(&kpis, &proxy, &self.config.lags)?;
            let path = self.layout.region_file(&p.name, "panel.csv");
            io::write_panel(&path, &panel)?;
            self.wrote(path);
        }
        Ok(())
    }

    fn correlate(&mut self) -> Result<()> {
        self.region_inputs(&["panel.csv", "proxy.csv"])?;
        for p in self.profiles.clone() {
            let panel = io::read_panel(&self.layout.region_file(&p.name, "panel.csv"))?;
            let report: CorrelationReport = correlation_report(&panel, &self.config.lags)?;
            let rows: Vec<CorrelationRow> = report.ranked().iter().map(CorrelationRow::from).collect();
            let path = self.layout.region_file(&p.name, "correlations.csv");
            io::write_rows(&path, &rows)?;
            self.wrote(path);

            let proxy: Vec<ProxyTarget> = io::read_rows(&self.layout.region_file(&p.name, "proxy.csv"))?;
            let acf = match proxy_autocorrelation(&proxy, 4) {
                Ok(rows) => rows,
                Err(Error::Undefined(m)) => {
                    log::warn!("{}: autocorrelation skipped: {m}", p.name);
                    Vec::new()
                }
                Err(e) => return Err(e),
            };
            let path = self.layout.region_file(&p.name, "acf_pacf.csv");
            io::write_rows_with_header(&path, &["lag", "acf", "pacf"], &acf)?;
            self.wrote(path);
        }
        Ok(())
    }

    fn train(&mut self) -> Result<()> {
        self.region_inputs(&["panel.csv"])?;
        let mut metrics = Vec::new();
        let mut predictions = Vec::new();
        for p in self.profiles.clone() {
            let panel = io::read_panel(&self.layout.region_file(&p.name, "panel.csv"))?;
            let trained = train_models(
                &p.name,
                &panel,
                &self.config.models,
                &self.config.split,
                region_seed(self.config.seed, &p.name),
            )?;
            for t in trained {
                log::info!("{} {}: accuracy {:.4}", p.name, t.artifact.name, t.metrics.accuracy);
                let path = self.layout.model_file(&p.name, &t.artifact.name);
                io::write_json(&path, &t.artifact)?;
                self.wrote(path);
                metrics.push(MetricRow::new(&t.artifact.name, &p.name, &t.metrics));
                predictions.extend(t.predictions);
            }
        }
        let header = ["model", "scenario", "rmse", "nrmse", "r2", "accuracy"];
        io::write_rows_with_header(&self.layout.metrics(), &header, &metrics)?;
        self.wrote(self.layout.metrics());
        let header = ["scenario", "model", "tile", "window", "actual", "predicted"];
        io::write_rows_with_header(&self.layout.predictions(), &header, &predictions)?;
        self.wrote(self.layout.predictions());
        Ok(())
    }

    fn transfer(&mut self) -> Result<()> {
        let Some(t) = self.config.transfer.clone() else {
            log::info!("transfer: not configured");
            return Ok(());
        };
        let src_path = self.layout.region_file(&t.source_region, "panel.csv");
        let tgt_path = self.layout.region_file(&t.target_region, "panel.csv");
        io::require(&src_path)?;
        io::require(&tgt_path)?;
        let source = io::read_panel(&src_path)?;
        let target = io::read_panel(&tgt_path)?;
        let (src, outcomes) = run_transfer(&source, &target, &t, &self.config.split, self.config.seed, t.repeats)?;
        log::info!("transfer source holdout accuracy {:.4}", src.holdout.accuracy);
        io::write_json(&self.layout.source_model(), &src.artifact)?;
        self.wrote(self.layout.source_model());
        let rows: Vec<TransferRow> = outcomes.iter().map(TransferRow::from).collect();
        io::write_rows(&self.layout.transfer_report(), &rows)?;
        self.wrote(self.layout.transfer_report());
        Ok(())
    }

    fn benchmark(&mut self) -> Result<()> {
        let Some(b) = self.config.benchmark.clone() else {
            log::info!("benchmark: not configured");
            return Ok(());
        };
        let proxy_path = self.layout.region_file(&b.region, "proxy.csv");
        io::require(&proxy_path)?;
        io::require(&self.layout.predictions())?;
        let windows = self.config.profile(&b.region)?.windows();
        let proxy: Vec<ProxyTarget> = io::read_rows(&proxy_path)?;
        let predictions: Vec<PredictionRow> = io::read_rows(&self.layout.predictions())?;
        let actuals = yearly_means(proxy.iter().map(|p| (windows.year_of(p.window), p.deployed_bw_mhz)));
        let predicted = yearly_means(
            predictions
                .iter()
                .filter(|r| r.scenario == b.region && r.model == b.model)
                .map(|r| (windows.year_of(r.window), r.predicted)),
        );
        if predicted.is_empty() {
            log::warn!("benchmark: no predictions of model `{}` for `{}`", b.model, b.region);
        }
        let cmp = compare_benchmarks(&b.region, &actuals, &predicted, &b.itu)?;
        io::write_rows(&self.layout.benchmark(), &cmp.rows)?;
        self.wrote(self.layout.benchmark());
        Ok(())
    }

    fn report(&mut self) -> Result<()> {
        let region = self.config.report_region()?;
        let optional = |path: PathBuf| if path.is_file() { Some(path) } else { None };
        let metrics: Vec<MetricRow> = match optional(self.layout.metrics()) {
            Some(p) => io::read_rows(&p)?,
            None => Vec::new(),
        };
        let correlations: Vec<CorrelationRow> = match optional(self.layout.region_file(&region, "correlations.csv")) {
            Some(p) => io::read_rows(&p)?,
            None => Vec::new(),
        };
        let acf: Vec<AcfRow> = match optional(self.layout.region_file(&region, "acf_pacf.csv")) {
            Some(p) => io::read_rows(&p)?,
            None => Vec::new(),
        };
        let benchmarks = match (&self.config.benchmark, optional(self.layout.benchmark())) {
            (Some(_), Some(p)) => Some(BenchmarkComparison {
                rows: io::read_rows(&p)?,
            }),
            _ => None,
        };
        let transfer: Vec<TransferRow> = match (&self.config.transfer, optional(self.layout.transfer_report())) {
            (Some(_), Some(p)) => io::read_rows(&p)?,
            _ => Vec::new(),
        };
        let inputs = ReportInputs {
            region: &region,
            metrics: &metrics,
            correlations: &correlations,
            acf: &acf,
            benchmarks: benchmarks.as_ref(),
            transfer: &transfer,
        };
        let dir = self.layout.report_dir();
        let manifest = emit_report(&inputs, &dir)?;
        for f in &manifest.files {
            self.wrote(dir.join(&f.path));
        }
        self.wrote(dir.join(crate::benchreport::MANIFEST_FILE));
        Ok(())
    }
}

/// Runs one stage (or all of them in order) and writes `run_meta.json`.
pub fn run_stage(stage: Stage, config: &RunConfig, out_dir: &Path) -> Result<RunMeta> {
    config.validate()?;
    let layout = Layout::new(out_dir);
    let mut run = StageRun {
        config,
        layout: &layout,
        profiles: config.profiles()?,
        written: Vec::new(),
    };
    let stages: Vec<Stage> = match stage {
        Stage::All => Stage::SEQUENCE.to_vec(),
        s => vec![s],
    };
    for s in stages {
        log::info!("stage {s}");
        match s {
            Stage::Gen => run.gen()?,
            Stage::Aggregate => run.aggregate()?,
            Stage::Cleanse => run.cleanse()?,
            Stage::Featurize => run.featurize()?,
            Stage::Correlate => run.correlate()?,
            Stage::Train => run.train()?,
            Stage::Transfer => run.transfer()?,
            Stage::Benchmark => run.benchmark()?,
            Stage::Report => run.report()?,
            Stage::All => unreachable!("expanded above"),
        }
    }
    let outputs = run
        .written
        .iter()
        .map(|p| {
            p.strip_prefix(out_dir)
                .unwrap_or(p)
                .to_string_lossy()
                .replace('\\', "/")
        })
        .collect();
    let meta = RunMeta {
        stage,
        config_hash: config.hash()?,
        seed: config.seed,
        demandcast_version: env!("CARGO_PKG_VERSION").to_string(),
        regions: run.profiles.iter().map(|p| p.name.clone()).collect(),
        outputs,
    };
    io::write_json(&layout.run_meta(), &meta)?;
    Ok(meta)
}
