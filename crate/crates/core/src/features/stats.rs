use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Standard deviation dividing by `n`.
pub fn population_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Sample Pearson correlation, clamped to `[-1, 1]`.
///
/// When exactly one input is constant there is no linear association and the
/// result is 0; when both are constant the coefficient is undefined.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Schema(format!("pearson inputs differ in length ({} vs {})", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("pearson needs at least two points".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    match (sxx > 0.0, syy > 0.0) {
        (false, false) => Err(Error::Undefined("correlation of two constant series".into())),
        (true, true) => Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)),
        _ => Ok(0.0),
    }
}

/// Sample ACF and PACF for lags `0..=max_lag`.
///
/// `acf[k] = sum (x_t - m)(x_{t+k} - m) / sum (x_t - m)^2`; the PACF comes
/// from the Durbin-Levinson recursion on the ACF, with `pacf[0] = 1`.
pub fn acf_pacf(series: &[f64], max_lag: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = series.len();
    if n <= max_lag + 1 {
        return Err(Error::InsufficientData(format!(
            "series of length {n} is too short for lag {max_lag}"
        )));
    }
    let m = mean(series);
    let dev: Vec<f64> = series.iter().map(|v| v - m).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if denom == 0.0 {
        return Err(Error::Undefined("autocorrelation of a constant series".into()));
    }
    let acf: Vec<f64> = (0..=max_lag)
        .map(|k| dev[..n - k].iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / denom)
        .collect();

    let mut pacf = vec![1.0; max_lag + 1];
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);
    for k in 1..=max_lag {
        let num = acf[k] - (1..k).map(|j| phi[j - 1] * acf[k - j]).sum::<f64>();
        let den = 1.0 - (1..k).map(|j| phi[j - 1] * acf[j]).sum::<f64>();
        let kk = if den.abs() < f64::EPSILON { 0.0 } else { num / den };
        let next: Vec<f64> = (1..k).map(|j| phi[j - 1] - kk * phi[k - j - 1]).collect();
        phi = next;
        phi.push(kk);
        pacf[k] = kk;
    }
    Ok((acf, pacf))
}
