//! Regressors fitted from scratch and their validation metrics.

mod artifact;
mod ensemble;
mod linear;
mod metrics;
mod split;
mod tree;

pub use artifact::{fit_model, ModelArtifact, ModelSpec, NamedModel, Predictor};
pub use ensemble::{fit_forest, fit_gbm, fit_tree, EnsembleKind, ForestParams, GbmParams, TreeEnsemble};
pub use linear::{
    coordinate_descent, fit_lasso, fit_ols, lambda_max, lasso_objective, soft_threshold, CoordinateDescent, FitMeta,
    LinearModel, Regularization,
};
pub use metrics::{evaluate, Metrics};
pub use split::{season_average, temporal_split, trailing_split_windows, DesignSet, TemporalSplit};
pub use tree::{TreeNode, TreeParams};
