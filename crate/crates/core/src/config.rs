//! Run configuration: one JSON document plus `key=value` overrides.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::benchreport::ItuBenchmarks;
use crate::error::{Error, Result};
use crate::features::DEFAULT_LAGS;
use crate::models::{ModelSpec, NamedModel};
use crate::quality::CleansePolicy;
use crate::spatial::GridSpec;
use crate::synthgen::{builtin_profile, builtin_profiles, CouplingSpec, RegionProfile};
use crate::transfer::{FineTuneModel, TransferConfig};

/// Environment variable holding the default config path.
pub const CONFIG_ENV: &str = "DEMANDCAST_CONFIG";

/// A region given by preset name or in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionEntry {
    Preset(PresetRef),
    Custom(RegionProfile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetRef {
    pub preset: String,
}

impl RegionEntry {
    pub fn resolve(&self) -> Result<RegionProfile> {
        match self {
            RegionEntry::Preset(p) => builtin_profile(&p.preset).ok_or_else(|| {
                let known: Vec<String> = builtin_profiles().into_iter().map(|p| p.name).collect();
                Error::Config(format!("regions: unknown preset `{}` (known: {})", p.preset, known.join(", ")))
            }),
            RegionEntry::Custom(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub tile_size_deg: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            tile_size_deg: GridSpec::DEFAULT_TILE_SIZE_DEG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Trailing windows held out for evaluation.
    pub test_windows: usize,
    /// Windows per seasonal cycle, for carrying train statistics forward.
    pub season_period: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_windows: 4,
            season_period: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferRunConfig {
    pub source_region: String,
    pub target_region: String,
    #[serde(default)]
    pub frozen_features: Vec<String>,
    #[serde(default = "default_target_fraction")]
    pub target_fraction: f64,
    #[serde(default = "default_fine_tune")]
    pub fine_tune_model: FineTuneModel,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Model fitted on the source region.
    #[serde(default = "default_source_model")]
    pub source_model: ModelSpec,
    /// Target subsamples drawn, seeded `seed, seed + 1, ...`.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_target_fraction() -> f64 {
    0.25
}

fn default_fine_tune() -> FineTuneModel {
    FineTuneModel::Lasso { lambda: 3.5 }
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    100_000
}

fn default_source_model() -> ModelSpec {
    ModelSpec::Ols
}

fn default_repeats() -> usize {
    10
}

impl TransferRunConfig {
    pub fn between(source: &str, target: &str) -> Self {
        TransferRunConfig {
            source_region: source.to_string(),
            target_region: target.to_string(),
            frozen_features: Vec::new(),
            target_fraction: default_target_fraction(),
            fine_tune_model: default_fine_tune(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            source_model: default_source_model(),
            repeats: default_repeats(),
        }
    }

    pub fn transfer_config(&self) -> TransferConfig {
        TransferConfig {
            source_region: self.source_region.clone(),
            target_region: self.target_region.clone(),
            frozen_features: self.frozen_features.clone(),
            target_fraction: self.target_fraction,
            fine_tune_model: self.fine_tune_model,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub region: String,
    /// Model whose held-out predictions are compared alongside the actuals.
    #[serde(default = "default_benchmark_model")]
    pub model: String,
    pub itu: ItuBenchmarks,
    /// Where the benchmark values come from; not part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn default_benchmark_model() -> String {
    "linear_regression".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_lags() -> Vec<usize> {
    DEFAULT_LAGS.to_vec()
}

pub fn default_models() -> Vec<NamedModel> {
    let named = |name: &str, spec| NamedModel {
        name: name.into(),
        spec,
    };
    vec![
        named("linear_regression", ModelSpec::Ols),
        named(
            "lasso",
            ModelSpec::Lasso {
                lambda: 0.5,
                tol: 1e-8,
                max_iter: 100_000,
            },
        ),
        named(
            "decision_tree",
            ModelSpec::Tree {
                max_depth: 6,
                min_leaf: 5,
            },
        ),
        named(
            "random_forest",
            ModelSpec::Forest {
                n_trees: 50,
                max_depth: 8,
                min_leaf: 5,
                feature_frac: 0.33,
                bootstrap: true,
            },
        ),
        named(
            "gradient_boosting",
            ModelSpec::Gbm {
                n_rounds: 100,
                learning_rate: 0.1,
                max_depth: 3,
                min_leaf: 5,
            },
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub regions: Vec<RegionEntry>,
    #[serde(default)]
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub cleanse: CleansePolicy,
    #[serde(default = "default_lags")]
    pub lags: Vec<usize>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default = "default_models")]
    pub models: Vec<NamedModel>,
    #[serde(default)]
    pub transfer: Option<TransferRunConfig>,
    #[serde(default)]
    pub benchmark: Option<BenchmarkConfig>,
    /// Region whose correlations and autocorrelations the report shows;
    /// defaults to the first region.
    #[serde(default)]
    pub report_region: Option<String>,
}

impl RunConfig {
    /// Both presets, the default models, toronto-like to ottawa-like
    /// transfer and no benchmarks.
    pub fn preset_scenario(seed: u64) -> Self {
        RunConfig {
            seed,
            output_dir: default_output_dir(),
            regions: ["ottawa-like", "toronto-like"]
                .map(|p| RegionEntry::Preset(PresetRef { preset: p.into() }))
                .to_vec(),
            coupling: CouplingSpec::default(),
            grid: GridConfig::default(),
            cleanse: CleansePolicy::default(),
            lags: default_lags(),
            split: SplitConfig::default(),
            models: default_models(),
            transfer: Some(TransferRunConfig::between("toronto-like", "ottawa-like")),
            benchmark: None,
            report_region: None,
        }
    }

    /// Parses `text`, applies `overrides` in order, then validates.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut value: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        for (k, v) in overrides {
            apply_override(&mut value, k, v)?;
        }
        let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("{}: {}", if path == "." { "config".into() } else { path }, e.into_inner()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::Config(format!("config file {} not found", path.display()))
            } else {
                Error::io(path, e)
            }
        })?;
        Self::parse(&text, overrides)
    }

    pub fn profiles(&self) -> Result<Vec<RegionProfile>> {
        self.regions.iter().map(RegionEntry::resolve).collect()
    }

    pub fn profile(&self, name: &str) -> Result<RegionProfile> {
        self.profiles()?
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Config(format!("region `{name}` is not defined")))
    }

    pub fn report_region(&self) -> Result<String> {
        match &self.report_region {
            Some(r) => Ok(r.clone()),
            None => Ok(self.profiles()?[0].name.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.regions.is_empty() {
            return cfg("regions: at least one region is required".into());
        }
        let profiles = self.profiles()?;
        let mut names = BTreeSet::new();
        for p in &profiles {
            p.validate()?;
            if !names.insert(p.name.as_str()) {
                return cfg(format!("regions: duplicate region `{}`", p.name));
            }
        }
        let known = |field: &str, name: &str| {
            if names.contains(name) {
                Ok(())
            } else {
                Err(Error::Config(format!("{field}: region `{name}` is not defined")))
            }
        };
        self.coupling.validate()?;
        if !(self.grid.tile_size_deg > 0.0 && self.grid.tile_size_deg.is_finite()) {
            return cfg(format!("grid.tile_size_deg must be > 0, got {}", self.grid.tile_size_deg));
        }
        self.cleanse.validate()?;
        if self.lags.is_empty() {
            return cfg("lags: at least one lag is required".into());
        }
        if self.lags.windows(2).any(|w| w[0] >= w[1]) {
            return cfg(format!("lags must be strictly increasing, got {:?}", self.lags));
        }
        if self.split.test_windows == 0 || self.split.season_period == 0 {
            return cfg("split.test_windows and split.season_period must be >= 1".into());
        }
        let mut model_names = BTreeSet::new();
        for (i, m) in self.models.iter().enumerate() {
            if m.name.is_empty() || !model_names.insert(m.name.as_str()) {
                return cfg(format!("models[{i}]: model names must be unique and non-empty (`{}`)", m.name));
            }
            m.spec
                .validate()
                .map_err(|e| Error::Config(format!("models[{i}] ({}): {e}", m.name)))?;
        }
        if let Some(t) = &self.transfer {
            known("transfer.source_region", &t.source_region)?;
            known("transfer.target_region", &t.target_region)?;
            t.transfer_config()
                .validate()
                .map_err(|e| Error::Config(format!("transfer: {e}")))?;
            t.source_model
                .validate()
                .map_err(|e| Error::Config(format!("transfer.source_model: {e}")))?;
            if t.repeats == 0 {
                return cfg("transfer.repeats must be >= 1".into());
            }
        }
        if let Some(b) = &self.benchmark {
            known("benchmark.region", &b.region)?;
            if !model_names.contains(b.model.as_str()) {
                return cfg(format!("benchmark.model: no model named `{}`", b.model));
            }
            b.itu
                .validate()
                .map_err(|e| Error::Config(format!("benchmark.itu: {e}")))?;
        }
        if let Some(r) = &self.report_region {
            known("report_region", r)?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of every field that affects results:
    /// presets are expanded, the output directory and benchmark note are
    /// left out.
    pub fn hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        let obj = v.as_object_mut().expect("config serializes to an object");
        obj.remove("output_dir");
        if let Some(b) = obj.get_mut("benchmark").and_then(Value::as_object_mut) {
            b.remove("note");
        }
        obj.insert("regions".into(), serde_json::to_value(self.profiles()?)?);
        obj.insert("report_region".into(), Value::String(self.report_region()?));
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(&v)?)))
    }
}

/// Sets the value at a dotted `key` (array elements by index). The value is
/// read as JSON when it parses, else taken as a string.
pub fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("--set: malformed key `{key}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("--set {key}: `{part}` is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("--set {key}: index {idx} out of range (len {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            Value::Null => {
                *node = Value::Object(Default::default());
                let Value::Object(map) = node else { unreachable!() };
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            _ => {
                return Err(Error::Config(format!(
                    "--set {key}: `{}` is not an object",
                    parts[..i].join(".")
                )))
            }
        };
    }
    unreachable!("loop returns on the last key part")
}
