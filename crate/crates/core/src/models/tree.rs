//! Regression trees grown by greedy variance reduction.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            TreeNode::Leaf { value, .. } => value.is_finite(),
            TreeNode::Split { threshold, left, right, .. } => {
                threshold.is_finite() && left.is_finite() && right.is_finite()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-split feature subsampling for random forests.
pub(crate) struct FeatureSampler<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub per_split: usize,
}

impl FeatureSampler<'_> {
    fn draw(&mut self, p: usize) -> Vec<usize> {
        let k = self.per_split.clamp(1, p);
        let mut pool: Vec<usize> = (0..p).collect();
        for i in 0..k {
            let j = self.rng.random_range(i..p);
            pool.swap(i, j);
        }
        let mut chosen = pool[..k].to_vec();
        chosen.sort_unstable();
        chosen
    }
}

struct Grower<'a, 'r> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    params: TreeParams,
    sampler: Option<FeatureSampler<'r>>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_, '_> {
    fn leaf(&self, rows: &[usize]) -> TreeNode {
        let mut sorted = rows.to_vec();
        sorted.sort_unstable();
        let value = sorted.iter().map(|&i| self.y[i]).sum::<f64>() / sorted.len() as f64;
        TreeNode::Leaf { value, n: rows.len() }
    }

    /// `by_feature[f]` lists the node's rows ordered by `(x[., f], row)`.
    fn grow(&mut self, by_feature: Vec<Vec<usize>>, depth: usize) -> TreeNode {
        let rows = &by_feature[0];
        let n = rows.len();
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf {
            return self.leaf(rows);
        }
        let first = self.y[rows[0]];
        if rows.iter().all(|&i| self.y[i] == first) {
            return self.leaf(rows);
        }
        let Some(best) = self.best_split(&by_feature) else {
            return self.leaf(rows);
        };

        let mut goes_left = vec![false; self.x.nrows()];
        for &i in rows {
            goes_left[i] = self.x[(i, best.feature)] <= best.threshold;
        }
        let (left, right): (Vec<Vec<usize>>, Vec<Vec<usize>>) = by_feature
            .into_iter()
            .map(|list| list.into_iter().partition(|&i| goes_left[i]))
            .unzip();
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn best_split(&mut self, by_feature: &[Vec<usize>]) -> Option<BestSplit> {
        let p = self.x.ncols();
        let features: Vec<usize> = match self.sampler.as_mut() {
            Some(s) => s.draw(p),
            None => (0..p).collect(),
        };
        let rows = &by_feature[0];
        let n = rows.len();
        let min_leaf = self.params.min_leaf;

        let mut ascending = rows.clone();
        ascending.sort_unstable();
        let total: f64 = ascending.iter().map(|&i| self.y[i]).sum();
        let mean = total / n as f64;
        let sse: f64 = ascending.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
        let base = total * total / n as f64;
        // Gains below this are rounding noise.
        let min_gain = 1e-12 * sse.max(f64::MIN_POSITIVE);

        let mut best: Option<BestSplit> = None;
        for &f in &features {
            let order = &by_feature[f];
            let mut left_sum = 0.0;
            for s in 1..n {
                left_sum += self.y[order[s - 1]];
                if s < min_leaf || n - s < min_leaf {
                    continue;
                }
                let a = self.x[(order[s - 1], f)];
                let b = self.x[(order[s], f)];
                if a >= b {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / s as f64 + right_sum * right_sum / (n - s) as f64 - base;
                if gain > min_gain && best.as_ref().is_none_or(|bs| gain > bs.gain) {
                    let mid = 0.5 * (a + b);
                    let threshold = if a <= mid && mid < b { mid } else { a };
                    best = Some(BestSplit { feature: f, threshold, gain });
                }
            }
        }
        best
    }
}

pub(crate) fn check_design(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::InsufficientData("empty design matrix".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::Schema(format!("{} rows but {} targets", x.nrows(), y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("design or target contains non-finite values".into()));
    }
    Ok(())
}

/// Grows one tree on the given rows (duplicates allowed, as in bootstraps).
pub(crate) fn grow_tree(
    x: &DMatrix<f64>,
    y: &[f64],
    rows: &[usize],
    params: TreeParams,
    sampler: Option<FeatureSampler<'_>>,
) -> TreeNode {
    let by_feature: Vec<Vec<usize>> = (0..x.ncols())
        .map(|f| {
            let mut order = rows.to_vec();
            order.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]).then(a.cmp(&b)));
            order
        })
        .collect();
    let mut grower = Grower { x, y, params, sampler };
    grower.grow(by_feature, 0)
}

/// Single CART regression tree.
///
/// Candidate thresholds are midpoints between consecutive distinct sorted
/// values; the best split maximises the reduction in squared error, with
/// ties going to the lowest feature index and then the lowest threshold.
pub fn fit_tree_node(x: &DMatrix<f64>, y: &[f64], params: TreeParams) -> Result<TreeNode> {
    check_design(x, y)?;
    params.validate()?;
    if x.nrows() < 2 * params.min_leaf {
        return Err(Error::InsufficientData(format!(
            "tree needs at least {} rows, got {}",
            2 * params.min_leaf,
            x.nrows()
        )));
    }
    let rows: Vec<usize> = (0..x.nrows()).collect();
    Ok(grow_tree(x, y, &rows, params, None))
}
