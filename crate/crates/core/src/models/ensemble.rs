//! Single trees, random forests and least-squares gradient boosting.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{check_design, fit_tree_node, grow_tree, FeatureSampler, TreeNode, TreeParams};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    SingleTree,
    RandomForest,
    GradientBoosted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub kind: EnsembleKind,
    /// Starting prediction; the target mean for boosting, 0 otherwise.
    pub base: f64,
    pub learning_rate: f64,
    pub rng_seed: u64,
    pub trees: Vec<TreeNode>,
    /// Training RMSE after each boosting round.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub train_rmse_history: Vec<f64>,
}

impl TreeEnsemble {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.kind {
            EnsembleKind::SingleTree => self.trees[0].predict_row(row),
            EnsembleKind::RandomForest => {
                self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
            }
            EnsembleKind::GradientBoosted => {
                self.base + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
            }
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                self.predict_row(&row)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Schema("ensemble has no trees".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Schema(format!("learning_rate {} outside (0, 1]", self.learning_rate)));
        }
        if !self.base.is_finite() || !self.trees.iter().all(TreeNode::is_finite) {
            return Err(Error::Schema("ensemble holds non-finite values".into()));
        }
        Ok(())
    }
}

pub fn fit_tree(x: &DMatrix<f64>, y: &[f64], max_depth: usize, min_leaf: usize) -> Result<TreeEnsemble> {
    let tree = fit_tree_node(x, y, TreeParams { max_depth, min_leaf })?;
    Ok(TreeEnsemble {
        kind: EnsembleKind::SingleTree,
        base: 0.0,
        learning_rate: 1.0,
        rng_seed: 0,
        trees: vec![tree],
        train_rmse_history: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of features drawn at each split, rounded up, at least one.
    pub feature_frac: f64,
    pub bootstrap: bool,
}

const STREAM_FOREST: u64 = 11;

/// Bagged trees with per-split feature subsampling.
///
/// Tree `k` draws its bootstrap and feature subsets from a stream keyed by
/// `(seed, k)`, so the result is the same however the trees are scheduled.
pub fn fit_forest(x: &DMatrix<f64>, y: &[f64], params: ForestParams, seed: u64) -> Result<TreeEnsemble> {
    check_design(x, y)?;
    if params.n_trees == 0 {
        return Err(Error::Config("n_trees must be >= 1".into()));
    }
    if !(params.feature_frac > 0.0 && params.feature_frac <= 1.0) {
        return Err(Error::Config(format!("feature_frac {} outside (0, 1]", params.feature_frac)));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
    };
    tree_params.validate()?;
    let n = x.nrows();
    if n < 2 * params.min_leaf {
        return Err(Error::InsufficientData(format!(
            "forest needs at least {} rows, got {n}",
            2 * params.min_leaf
        )));
    }
    let p = x.ncols();
    let per_split = ((params.feature_frac * p as f64).ceil() as usize).clamp(1, p);

    let trees: Vec<TreeNode> = (0..params.n_trees)
        .into_par_iter()
        .map(|k| {
            let mut stream = rng::stream(seed, &[STREAM_FOREST, k as u64]);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| stream.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let sampler = (per_split < p).then_some(FeatureSampler {
                rng: &mut stream,
                per_split,
            });
            grow_tree(x, y, &rows, tree_params, sampler)
        })
        .collect();

    Ok(TreeEnsemble {
        kind: EnsembleKind::RandomForest,
        base: 0.0,
        learning_rate: 1.0,
        rng_seed: seed,
        trees,
        train_rmse_history: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

fn rmse(residual: &[f64]) -> f64 {
    (residual.iter().map(|r| r * r).sum::<f64>() / residual.len() as f64).sqrt()
}

/// Least-squares gradient boosting: each round fits a tree to the current
/// residuals and adds it scaled by the learning rate.
///
/// Every tree sees all rows and all features, so `seed` is recorded but
/// does not affect the fit.
pub fn fit_gbm(x: &DMatrix<f64>, y: &[f64], params: GbmParams, seed: u64) -> Result<TreeEnsemble> {
    check_design(x, y)?;
    if params.n_rounds == 0 {
        return Err(Error::Config("n_rounds must be >= 1".into()));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(Error::Config(format!("learning_rate {} outside (0, 1]", params.learning_rate)));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
    };
    tree_params.validate()?;
    let n = x.nrows();
    if n < 2 * params.min_leaf {
        return Err(Error::InsufficientData(format!(
            "boosting needs at least {} rows, got {n}",
            2 * params.min_leaf
        )));
    }
    let rows: Vec<usize> = (0..n).collect();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut residual: Vec<f64> = y.iter().map(|v| v - base).collect();
    let row_values: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();

    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut history = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        let mut tree = grow_tree(x, &residual, &rows, tree_params, None);
        if let TreeNode::Leaf { value, .. } = &mut tree {
            // Residuals already average to zero up to rounding; applying that
            // rounding could only make the loss drift upward.
            *value = 0.0;
        }
        for (r, row) in residual.iter_mut().zip(&row_values) {
            *r -= params.learning_rate * tree.predict_row(row);
        }
        history.push(rmse(&residual));
        trees.push(tree);
    }
    Ok(TreeEnsemble {
        kind: EnsembleKind::GradientBoosted,
        base,
        learning_rate: params.learning_rate,
        rng_seed: seed,
        trees,
        train_rmse_history: history,
    })
}
