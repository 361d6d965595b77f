//! Ordinary least squares and L1-penalised least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Regularization {
    None,
    L1 { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitMeta {
    /// Coordinate-descent sweeps; 0 for closed-form fits.
    pub iterations: usize,
    /// Largest parameter change in the last sweep.
    pub final_change: f64,
    /// Lasso duality gap at the returned iterate, in objective units.
    pub duality_gap: Option<f64>,
    /// Euclidean norm of the training residual.
    pub residual_norm: f64,
    /// Numerical rank of the centred design (OLS only).
    pub rank: Option<usize>,
    /// Objective after each coordinate-descent sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub regularization: Regularization,
    pub fit_meta: FitMeta,
}

impl LinearModel {
    pub fn zeros(n_features: usize) -> Self {
        LinearModel {
            intercept: 0.0,
            coefficients: vec![0.0; n_features],
            regularization: Regularization::None,
            fit_meta: FitMeta::default(),
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                self.intercept
                    + self
                        .coefficients
                        .iter()
                        .enumerate()
                        .map(|(j, b)| b * x[(i, j)])
                        .sum::<f64>()
            })
            .collect()
    }
}

fn check_shapes(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
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

fn residual_norm(model: &LinearModel, x: &DMatrix<f64>, y: &[f64]) -> f64 {
    model
        .predict(x)
        .iter()
        .zip(y)
        .map(|(p, t)| (t - p).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Least squares with an intercept, via SVD of the centred design.
///
/// Singular values below `max(n, p) * eps * sigma_max` are treated as zero,
/// which yields the minimum-norm solution for rank-deficient designs.
pub fn fit_ols(x: &DMatrix<f64>, y: &[f64]) -> Result<LinearModel> {
    check_shapes(x, y)?;
    let (n, p) = x.shape();
    if n < p + 1 {
        return Err(Error::InsufficientData(format!("OLS needs at least {} rows for {p} features, got {n}", p + 1)));
    }
    let col_means: Vec<f64> = (0..p).map(|j| x.column(j).sum() / n as f64).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - col_means[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let svd = xc.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = n.max(p) as f64 * f64::EPSILON * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    if rank < p {
        log::warn!("OLS design is rank deficient (rank {rank} < {p}); returning the minimum-norm solution");
    }
    let beta = if sigma_max > 0.0 {
        svd.solve(&yc, eps).map_err(|e| Error::Numeric(e.to_string()))?
    } else {
        DVector::zeros(p)
    };
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - coefficients.iter().zip(&col_means).map(|(b, m)| b * m).sum::<f64>();
    let mut model = LinearModel {
        intercept,
        coefficients,
        regularization: Regularization::None,
        fit_meta: FitMeta {
            rank: Some(rank),
            ..FitMeta::default()
        },
    };
    model.fit_meta.residual_norm = residual_norm(&model, x, y);
    Ok(model)
}

pub fn soft_threshold(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

/// `(1/2n) ||r||^2 + lambda ||beta||_1`.
pub fn lasso_objective(residual: &[f64], coefficients: &[f64], lambda: f64) -> f64 {
    let n = residual.len() as f64;
    residual.iter().map(|r| r * r).sum::<f64>() / (2.0 * n) + lambda * coefficients.iter().map(|b| b.abs()).sum::<f64>()
}

/// Smallest penalty for which the lasso solution is all zeros:
/// `max_j |x_j^T (y - mean y)| / n`.
pub fn lambda_max(x: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    (0..x.ncols())
        .map(|j| {
            x.column(j)
                .iter()
                .zip(y)
                .map(|(a, b)| a * (b - y_mean))
                .sum::<f64>()
                .abs()
                / n
        })
        .fold(0.0, f64::max)
}

/// Options for warm-started, partially frozen coordinate descent.
#[derive(Debug, Clone, Copy)]
pub struct CoordinateDescent<'a> {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; cold start from zeros when `None`.
    pub init: Option<&'a LinearModel>,
    /// Coefficients held at their starting value.
    pub frozen: Option<&'a [bool]>,
}

/// Lasso by cyclic coordinate descent with soft-thresholding on
/// `(1/2n) ||y - b0 - X beta||^2 + lambda ||beta||_1`, intercept unpenalised.
///
/// Callers are expected to standardize `x` column-wise. Converged when the
/// largest parameter change in a sweep drops below `tol`.
pub fn fit_lasso(x: &DMatrix<f64>, y: &[f64], lambda: f64, tol: f64, max_iter: usize) -> Result<LinearModel> {
    check_shapes(x, y)?;
    // Zero is optimal from lambda_max up; holding every coefficient there keeps
    // the answer exact instead of within rounding of zero.
    let all_zero = vec![lambda >= lambda_max(x, y); x.ncols()];
    coordinate_descent(
        x,
        y,
        CoordinateDescent {
            lambda,
            tol,
            max_iter,
            init: None,
            frozen: Some(&all_zero),
        },
    )
}

/// General coordinate descent behind [`fit_lasso`].
///
/// Each sweep updates the intercept, then every unfrozen coefficient in
/// column order. With `max_iter == 0` the starting point is returned as is.
pub fn coordinate_descent(x: &DMatrix<f64>, y: &[f64], opts: CoordinateDescent<'_>) -> Result<LinearModel> {
    check_shapes(x, y)?;
    if !(opts.lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be >= 0, got {}", opts.lambda)));
    }
    let (n, p) = x.shape();
    let nf = n as f64;
    let mut model = match opts.init {
        Some(m) => {
            if m.coefficients.len() != p {
                return Err(Error::Schema(format!(
                    "warm start has {} coefficients for {p} features",
                    m.coefficients.len()
                )));
            }
            m.clone()
        }
        None => LinearModel::zeros(p),
    };
    model.regularization = if opts.lambda > 0.0 {
        Regularization::L1 { lambda: opts.lambda }
    } else {
        Regularization::None
    };
    let frozen = opts.frozen.unwrap_or(&[]);
    let is_frozen = |j: usize| frozen.get(j).copied().unwrap_or(false);

    let mut residual: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(i, &t)| t - model.predict_row(&x.row(i).iter().copied().collect::<Vec<_>>()))
        .collect();
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).iter().map(|v| v * v).sum::<f64>() / nf).collect();

    let mut history = Vec::new();
    let mut last_change = f64::INFINITY;
    let mut converged = opts.max_iter == 0;
    let mut sweeps = 0;
    while sweeps < opts.max_iter {
        sweeps += 1;
        let mut max_change: f64 = 0.0;

        let shift = residual.iter().sum::<f64>() / nf;
        if shift != 0.0 {
            model.intercept += shift;
            residual.iter_mut().for_each(|r| *r -= shift);
            max_change = max_change.max(shift.abs());
        }

        for (j, &sq) in col_sq.iter().enumerate() {
            if is_frozen(j) {
                continue;
            }
            let old = model.coefficients[j];
            let col = x.column(j);
            let new = if sq > 0.0 {
                let rho = col.iter().zip(&residual).map(|(a, r)| a * r).sum::<f64>() / nf + sq * old;
                soft_threshold(rho, opts.lambda) / sq
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                for (r, a) in residual.iter_mut().zip(col.iter()) {
                    *r -= a * delta;
                }
                model.coefficients[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        history.push(lasso_objective(&residual, &model.coefficients, opts.lambda));
        last_change = max_change;
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }

    model.fit_meta = FitMeta {
        iterations: sweeps,
        final_change: if sweeps == 0 { 0.0 } else { last_change },
        duality_gap: Some(duality_gap(x, y, &residual, &model, opts.lambda)),
        residual_norm: residual.iter().map(|r| r * r).sum::<f64>().sqrt(),
        rank: None,
        objective_history: history,
    };
    if !converged {
        return Err(Error::NotConverged {
            iterations: sweeps,
            last_change,
            model: Box::new(model),
        });
    }
    Ok(model)
}

/// Duality gap of the lasso problem with the intercept held at its current
/// value, scaled like the primal objective.
fn duality_gap(x: &DMatrix<f64>, y: &[f64], residual: &[f64], model: &LinearModel, lambda: f64) -> f64 {
    let n = y.len() as f64;
    let r2: f64 = residual.iter().map(|r| r * r).sum();
    let primal = r2 / (2.0 * n) + lambda * model.coefficients.iter().map(|b| b.abs()).sum::<f64>();
    let corr = (0..x.ncols())
        .map(|j| x.column(j).iter().zip(residual).map(|(a, r)| a * r).sum::<f64>().abs())
        .fold(0.0, f64::max);
    let scale = if lambda > 0.0 && corr > n * lambda { n * lambda / corr } else { 1.0 };
    if lambda == 0.0 && corr > 0.0 {
        // No finite dual point; report the stationarity violation instead.
        return corr / n;
    }
    let y_shift: Vec<f64> = y.iter().map(|t| t - model.intercept).collect();
    let ry: f64 = residual.iter().zip(&y_shift).map(|(r, t)| r * t).sum();
    let dual = scale * ry / n - scale * scale * r2 / (2.0 * n);
    (primal - dual).max(0.0)
}
