//! Model specifications and serialized fitted models.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ensemble::{fit_forest, fit_gbm, fit_tree, ForestParams, GbmParams, TreeEnsemble};
use super::linear::{fit_lasso, fit_ols, FitMeta, LinearModel, Regularization};
use crate::error::{Error, Result};
use crate::features::Standardization;

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    10_000
}

fn default_bootstrap() -> bool {
    true
}

/// Hyperparameters of one model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Ols,
    Lasso {
        lambda: f64,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
    Tree {
        max_depth: usize,
        min_leaf: usize,
    },
    Forest {
        n_trees: usize,
        max_depth: usize,
        min_leaf: usize,
        feature_frac: f64,
        #[serde(default = "default_bootstrap")]
        bootstrap: bool,
    },
    Gbm {
        n_rounds: usize,
        learning_rate: f64,
        max_depth: usize,
        min_leaf: usize,
    },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match *self {
            ModelSpec::Ols => Ok(()),
            ModelSpec::Lasso { lambda, tol, max_iter } => {
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    bad(format!("lasso lambda must be a finite value >= 0, got {lambda}"))
                } else if !(tol > 0.0) {
                    bad(format!("lasso tol must be > 0, got {tol}"))
                } else if max_iter == 0 {
                    bad("lasso max_iter must be >= 1".into())
                } else {
                    Ok(())
                }
            }
            ModelSpec::Tree { min_leaf: 0, .. } => bad("tree min_leaf must be >= 1".into()),
            ModelSpec::Tree { .. } => Ok(()),
            ModelSpec::Forest {
                n_trees,
                min_leaf,
                feature_frac,
                ..
            } => {
                if n_trees == 0 {
                    bad("forest n_trees must be >= 1".into())
                } else if min_leaf == 0 {
                    bad("forest min_leaf must be >= 1".into())
                } else if !(feature_frac > 0.0 && feature_frac <= 1.0) {
                    bad(format!("forest feature_frac must be in (0, 1], got {feature_frac}"))
                } else {
                    Ok(())
                }
            }
            ModelSpec::Gbm {
                n_rounds,
                learning_rate,
                min_leaf,
                ..
            } => {
                if n_rounds == 0 {
                    bad("gbm n_rounds must be >= 1".into())
                } else if min_leaf == 0 {
                    bad("gbm min_leaf must be >= 1".into())
                } else if !(learning_rate > 0.0 && learning_rate <= 1.0) {
                    bad(format!("gbm learning_rate must be in (0, 1], got {learning_rate}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, ModelSpec::Ols | ModelSpec::Lasso { .. })
    }
}

/// A model spec under a display name, e.g. `linear_regression`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedModel {
    pub name: String,
    #[serde(flatten)]
    pub spec: ModelSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Linear(LinearModel),
    Ensemble(TreeEnsemble),
}

impl Predictor {
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        match self {
            Predictor::Linear(m) => m.predict(x),
            Predictor::Ensemble(m) => m.predict(x),
        }
    }

    pub fn as_linear(&self) -> Option<&LinearModel> {
        match self {
            Predictor::Linear(m) => Some(m),
            Predictor::Ensemble(_) => None,
        }
    }
}

pub fn fit_model(spec: &ModelSpec, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<Predictor> {
    spec.validate()?;
    Ok(match *spec {
        ModelSpec::Ols => Predictor::Linear(fit_ols(x, y)?),
        ModelSpec::Lasso { lambda, tol, max_iter } => Predictor::Linear(fit_lasso(x, y, lambda, tol, max_iter)?),
        ModelSpec::Tree { max_depth, min_leaf } => Predictor::Ensemble(fit_tree(x, y, max_depth, min_leaf)?),
        ModelSpec::Forest {
            n_trees,
            max_depth,
            min_leaf,
            feature_frac,
            bootstrap,
        } => Predictor::Ensemble(fit_forest(
            x,
            y,
            ForestParams {
                n_trees,
                max_depth,
                min_leaf,
                feature_frac,
                bootstrap,
            },
            seed,
        )?),
        ModelSpec::Gbm {
            n_rounds,
            learning_rate,
            max_depth,
            min_leaf,
        } => Predictor::Ensemble(fit_gbm(
            x,
            y,
            GbmParams {
                n_rounds,
                learning_rate,
                max_depth,
                min_leaf,
            },
            seed,
        )?),
    })
}

/// A fitted model with everything needed to apply it to new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ArtifactJson", try_from = "ArtifactJson")]
pub struct ModelArtifact {
    pub name: String,
    pub spec: ModelSpec,
    pub features: Vec<String>,
    pub predictor: Predictor,
    /// Per-window statistics of the training rows.
    pub standardization: Option<Standardization>,
    pub train_windows: Vec<usize>,
    pub seed: u64,
}

impl ModelArtifact {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.features.len() {
            return Err(Error::Schema(format!(
                "model {} expects {} features, got {}",
                self.name,
                self.features.len(),
                x.ncols()
            )));
        }
        Ok(self.predictor.predict(x))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum PredictorJson {
    Linear {
        intercept: f64,
        coefficients: BTreeMap<String, f64>,
        regularization: Regularization,
        fit_meta: FitMeta,
    },
    Ensemble(TreeEnsemble),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArtifactJson {
    name: String,
    spec: ModelSpec,
    features: Vec<String>,
    model: PredictorJson,
    standardization: Option<Standardization>,
    train_windows: Vec<usize>,
    seed: u64,
}

impl From<ModelArtifact> for ArtifactJson {
    fn from(a: ModelArtifact) -> Self {
        let model = match a.predictor {
            Predictor::Linear(m) => PredictorJson::Linear {
                intercept: m.intercept,
                coefficients: a.features.iter().cloned().zip(m.coefficients).collect(),
                regularization: m.regularization,
                fit_meta: m.fit_meta,
            },
            Predictor::Ensemble(e) => PredictorJson::Ensemble(e),
        };
        ArtifactJson {
            name: a.name,
            spec: a.spec,
            features: a.features,
            model,
            standardization: a.standardization,
            train_windows: a.train_windows,
            seed: a.seed,
        }
    }
}

impl TryFrom<ArtifactJson> for ModelArtifact {
    type Error = Error;

    fn try_from(j: ArtifactJson) -> Result<Self> {
        let predictor = match j.model {
            PredictorJson::Linear {
                intercept,
                mut coefficients,
                regularization,
                fit_meta,
            } => {
                let coefs = j
                    .features
                    .iter()
                    .map(|f| {
                        coefficients
                            .remove(f)
                            .ok_or_else(|| Error::Schema(format!("missing coefficient for feature {f}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if let Some(extra) = coefficients.keys().next() {
                    return Err(Error::Schema(format!("coefficient for unknown feature {extra}")));
                }
                Predictor::Linear(LinearModel {
                    intercept,
                    coefficients: coefs,
                    regularization,
                    fit_meta,
                })
            }
            PredictorJson::Ensemble(e) => {
                e.validate()?;
                Predictor::Ensemble(e)
            }
        };
        Ok(ModelArtifact {
            name: j.name,
            spec: j.spec,
            features: j.features,
            predictor,
            standardization: j.standardization,
            train_windows: j.train_windows,
            seed: j.seed,
        })
    }
}
