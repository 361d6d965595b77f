//! Cross-region transfer: a model trained on a data-rich source region feeds
//! its bandwidth estimates to a model fine-tuned on a sparse target region.
//!
//! Layer freezing maps onto coefficient freezing: the fine-tuned linear model
//! starts from the source coefficients, first refits with `frozen_features`
//! held fixed, then releases them and refits once more.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeaturePanel, PanelRow};
use crate::models::{
    coordinate_descent, evaluate, fit_model, temporal_split, CoordinateDescent, LinearModel, Metrics, ModelArtifact,
    ModelSpec, Predictor, TemporalSplit,
};
use crate::rng;

/// Name of the appended source-estimate column.
pub const SOURCE_ESTIMATE_COLUMN: &str = "source_proxy_est";

const STREAM_SUBSAMPLE: u64 = 21;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FineTuneModel {
    Ols,
    Lasso { lambda: f64 },
}

impl FineTuneModel {
    fn lambda(self) -> f64 {
        match self {
            FineTuneModel::Ols => 0.0,
            FineTuneModel::Lasso { lambda } => lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    pub source_region: String,
    pub target_region: String,
    /// Feature columns held at their source coefficients in the first pass.
    #[serde(default)]
    pub frozen_features: Vec<String>,
    /// Share of target train rows available, sampled within each window.
    pub target_fraction: f64,
    pub fine_tune_model: FineTuneModel,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Sweep cap per fine-tuning pass; 0 keeps the warm start unchanged.
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    10_000
}

impl TransferConfig {
    pub fn validate(&self) -> Result<()> {
        if self.source_region == self.target_region {
            return Err(Error::Config(format!(
                "transfer source and target must differ (both `{}`)",
                self.source_region
            )));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "transfer.target_fraction must be in (0, 1], got {}",
                self.target_fraction
            )));
        }
        if let FineTuneModel::Lasso { lambda } = self.fine_tune_model {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(Error::Config(format!("transfer lasso lambda must be >= 0, got {lambda}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("transfer.tol must be > 0".into()));
        }
        Ok(())
    }

    /// The scratch-arm model: the fine-tune family fitted from zeros.
    pub fn scratch_spec(&self) -> ModelSpec {
        match self.fine_tune_model {
            FineTuneModel::Ols => ModelSpec::Ols,
            FineTuneModel::Lasso { lambda } => ModelSpec::Lasso {
                lambda,
                tol: self.tol,
                max_iter: self.max_iter.max(1),
            },
        }
    }
}

/// Source model with its own holdout score.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    pub artifact: ModelArtifact,
    pub holdout: Metrics,
}

/// Fits `spec` on the source panel's train windows and scores it on its test
/// windows. The artifact keeps the source's per-window statistics.
pub fn train_source(
    panel: &FeaturePanel,
    spec: &ModelSpec,
    train_windows: &[usize],
    test_windows: &[usize],
    season_period: usize,
    seed: u64,
) -> Result<SourceModel> {
    if panel.rows.is_empty() {
        return Err(Error::InsufficientData("source panel is empty".into()));
    }
    let split = temporal_split(panel, train_windows, test_windows, season_period)?;
    let predictor = fit_model(spec, &split.train.x, &split.train.y, seed)?;
    let holdout = evaluate(&split.test.y, &predictor.predict(&split.test.x))?;
    Ok(SourceModel {
        artifact: ModelArtifact {
            name: "source".into(),
            spec: spec.clone(),
            features: split.columns.clone(),
            predictor,
            standardization: Some(split.train_stats),
            train_windows: train_windows.to_vec(),
            seed,
        },
        holdout,
    })
}

/// Fine-tuned target model. Its last feature is the source estimate, kept in
/// MHz so the L1 penalty barely shrinks it.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferredModel {
    pub artifact: ModelArtifact,
}

impl TransferredModel {
    /// Predicts rows of a design that has the source columns only.
    pub fn predict(&self, source: &ModelArtifact, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let est = source.predict(x)?;
        self.artifact.predict(&append_column(x, &est))
    }
}

fn append_column(x: &DMatrix<f64>, values: &[f64]) -> DMatrix<f64> {
    let (n, p) = x.shape();
    DMatrix::from_fn(n, p + 1, |i, j| if j < p { x[(i, j)] } else { values[i] })
}

/// Fine-tunes on the split's train rows, warm-started at the source model.
///
/// The source must be linear to seed the warm start; other source families
/// still supply the estimate column but the fit starts from zeros.
pub fn transfer_fine_tune(
    source: &ModelArtifact,
    split: &TemporalSplit,
    config: &TransferConfig,
) -> Result<TransferredModel> {
    config.validate()?;
    if split.columns != source.features {
        return Err(Error::Schema(format!(
            "target columns {:?} do not match source columns {:?}",
            split.columns, source.features
        )));
    }
    let unknown: Vec<&String> = config
        .frozen_features
        .iter()
        .filter(|f| !split.columns.contains(f))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Config(format!("frozen_features not in the panel: {unknown:?}")));
    }

    let est = source.predict(&split.train.x)?;
    let x = append_column(&split.train.x, &est);
    let p = split.columns.len();

    let init = match source.predictor.as_linear() {
        Some(m) => {
            let mut coefficients = m.coefficients.clone();
            coefficients.push(0.0);
            LinearModel {
                intercept: m.intercept,
                coefficients,
                ..LinearModel::zeros(p + 1)
            }
        }
        None => LinearModel::zeros(p + 1),
    };
    let frozen: Vec<bool> = split
        .columns
        .iter()
        .map(|c| config.frozen_features.contains(c))
        .chain(std::iter::once(false))
        .collect();
    let lambda = config.fine_tune_model.lambda();

    let first = coordinate_descent(
        &x,
        &split.train.y,
        CoordinateDescent {
            lambda,
            tol: config.tol,
            max_iter: config.max_iter,
            init: Some(&init),
            frozen: Some(&frozen),
        },
    )?;
    let model = if frozen.iter().any(|&f| f) {
        coordinate_descent(
            &x,
            &split.train.y,
            CoordinateDescent {
                lambda,
                tol: config.tol,
                max_iter: config.max_iter,
                init: Some(&first),
                frozen: None,
            },
        )?
    } else {
        first
    };

    let mut features = split.columns.clone();
    features.push(SOURCE_ESTIMATE_COLUMN.to_string());
    Ok(TransferredModel {
        artifact: ModelArtifact {
            name: "transferred".into(),
            spec: config.scratch_spec(),
            features,
            predictor: Predictor::Linear(model),
            standardization: Some(split.train_stats.clone()),
            train_windows: split.train.windows().into_iter().collect(),
            seed: source.seed,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub source_region: String,
    pub target_region: String,
    pub target_fraction: f64,
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub metrics_with_transfer: Metrics,
    pub metrics_without_transfer: Metrics,
    /// `1 - nrmse_with / nrmse_without`.
    pub relative_nrmse_reduction: f64,
}

pub fn relative_reduction(nrmse_with: f64, nrmse_without: f64) -> f64 {
    1.0 - nrmse_with / nrmse_without
}

/// Keeps `fraction` of the rows of every train window (at least two), drawn
/// per window from a seeded stream. Test rows are all kept.
pub fn subsample_train_rows(
    panel: &FeaturePanel,
    train_windows: &[usize],
    fraction: f64,
    seed: u64,
) -> FeaturePanel {
    let train: BTreeSet<usize> = train_windows.iter().copied().collect();
    let mut by_window: BTreeMap<usize, Vec<&PanelRow>> = BTreeMap::new();
    for r in panel.rows.iter().filter(|r| train.contains(&r.window)) {
        by_window.entry(r.window).or_default().push(r);
    }
    let mut kept = BTreeSet::new();
    for (w, mut rows) in by_window {
        rows.sort_by_key(|r| r.tile);
        let k = ((fraction * rows.len() as f64).round() as usize).clamp(2.min(rows.len()), rows.len());
        let mut stream = rng::stream(seed, &[STREAM_SUBSAMPLE, w as u64]);
        rows.shuffle(&mut stream);
        kept.extend(rows[..k].iter().map(|r| (r.tile, r.window)));
    }
    panel.filter_rows(|r| !train.contains(&r.window) || kept.contains(&(r.tile, r.window)))
}

/// Fits the scratch and transferred arms on identical target train rows and
/// scores both on identical target test rows.
#[allow(clippy::too_many_arguments)]
pub fn compare_transfer(
    target: &FeaturePanel,
    source: &ModelArtifact,
    config: &TransferConfig,
    train_windows: &[usize],
    test_windows: &[usize],
    season_period: usize,
    seed: u64,
) -> Result<TransferOutcome> {
    config.validate()?;
    let available = subsample_train_rows(target, train_windows, config.target_fraction, seed);
    let split = temporal_split(&available, train_windows, test_windows, season_period)?;

    let scratch = fit_model(&config.scratch_spec(), &split.train.x, &split.train.y, seed)?;
    let without = evaluate(&split.test.y, &scratch.predict(&split.test.x))?;

    let transferred = transfer_fine_tune(source, &split, config)?;
    let with = evaluate(&split.test.y, &transferred.predict(source, &split.test.x)?)?;

    Ok(TransferOutcome {
        source_region: config.source_region.clone(),
        target_region: config.target_region.clone(),
        target_fraction: config.target_fraction,
        seed,
        train_rows: split.train.len(),
        test_rows: split.test.len(),
        relative_nrmse_reduction: relative_reduction(with.nrmse, without.nrmse),
        metrics_with_transfer: with,
        metrics_without_transfer: without,
    })
}
