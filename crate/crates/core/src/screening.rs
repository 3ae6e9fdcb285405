//! Predictor screening against the target: marginal-correlation scores for the
//! static path, lagged-regression R² for the dynamic path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ols_with_intercept, Matrix};

/// Default keep-fraction grid for screening.
pub const KEEP_FRACTION_GRID: [f64; 5] = [0.1, 0.2, 0.5, 0.75, 1.0];

/// Default candidate lag orders.
pub const DEFAULT_LAGS: [usize; 2] = [1, 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenResult {
    /// One relevance score per predictor.
    pub scores: Vec<f64>,
    /// Retained predictor indices, ascending.
    pub selected: Vec<usize>,
    pub keep_fraction: f64,
    /// Lag order of each retained predictor (dynamic screening only), aligned with `selected`.
    pub lags: Option<Vec<usize>>,
}

/// `ceil(keep_fraction · p)`, at least one.
pub fn keep_count(keep_fraction: f64, p: usize) -> Result<usize> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::ConfigInvalid(format!(
            "keep_fraction {keep_fraction} outside (0, 1]"
        )));
    }
    // guard against 0.1·500 landing a hair above 50
    let k = (keep_fraction * p as f64 - 1e-9).ceil() as usize;
    Ok(k.clamp(1, p))
}

/// Indices of the `k` largest scores (ties to the smaller index), returned ascending.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut sel = order[..k.min(scores.len())].to_vec();
    sel.sort_unstable();
    sel
}

fn check_inputs(x: &Matrix, y: &[f64], h: usize) -> Result<()> {
    if x.cols() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "panel has {} periods, target has {}",
            x.cols(),
            y.len()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::InsufficientData("empty predictor panel".into()));
    }
    let t = y.len();
    if t <= h + 1 {
        return Err(Error::HorizonTooLarge { h, t });
    }
    Ok(())
}

/// Marginal screening: `ω_j = |(1/T) Σ_{t=1}^{T−h} x_{j,t} y_{t+h}|`, keeping the top
/// `ceil(keep_fraction·p)` predictors.
pub fn static_screen(x: &Matrix, y: &[f64], h: usize, keep_fraction: f64) -> Result<ScreenResult> {
    check_inputs(x, y, h)?;
    let t = y.len();
    let k = keep_count(keep_fraction, x.rows())?;
    let lead = &y[h..];
    let scores: Vec<f64> = (0..x.rows())
        .map(|j| {
            let s: f64 = x.row(j)[..t - h].iter().zip(lead).map(|(a, b)| a * b).sum();
            (s / t as f64).abs()
        })
        .collect();
    Ok(ScreenResult {
        selected: top_k(&scores, k),
        scores,
        keep_fraction,
        lags: None,
    })
}

pub(crate) fn normalize_lags(candidate_lags: &[usize]) -> Result<Vec<usize>> {
    let mut lags = candidate_lags.to_vec();
    lags.sort_unstable();
    lags.dedup();
    if lags.is_empty() || lags[0] == 0 {
        return Err(Error::ConfigInvalid(
            "candidate lags must be a non-empty set of positive orders".into(),
        ));
    }
    Ok(lags)
}

/// Design for regressing `y_{s+h}` on `(x_s, …, x_{s−q+1})` for `s` in `start..end` (0-based).
pub(crate) fn lag_design(x: &[f64], y: &[f64], h: usize, q: usize, start: usize, end: usize) -> (Matrix, Vec<f64>) {
    let n = end - start;
    let mut m = Matrix::zeros(n, q);
    for (r, s) in (start..end).enumerate() {
        for l in 0..q {
            m[(r, l)] = x[s - l];
        }
    }
    (m, y[start + h..end + h].to_vec())
}

/// Common regression sample `(start, end)` for the largest candidate lag.
pub(crate) fn common_sample(t: usize, h: usize, q_max: usize) -> Result<(usize, usize)> {
    let start = q_max - 1;
    let end = t - h;
    if end <= start + q_max {
        return Err(Error::TooShort {
            required: h + 2 * q_max + 1,
            actual: t,
        });
    }
    Ok((start, end))
}

/// Lag order minimizing AIC of the lagged regression over the common sample
/// (ties to the smaller order).
pub fn select_lag(x: &[f64], y: &[f64], h: usize, candidate_lags: &[usize]) -> Result<usize> {
    let lags = normalize_lags(candidate_lags)?;
    if lags.len() == 1 {
        return Ok(lags[0]);
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch("x and y lengths differ".into()));
    }
    let t = y.len();
    if t <= h + 1 {
        return Err(Error::HorizonTooLarge { h, t });
    }
    let q_max = *lags.last().unwrap();
    let (start, end) = common_sample(t, h, q_max)?;
    let mut best = (lags[0], f64::INFINITY);
    for &q in &lags {
        let (design, target) = lag_design(x, y, h, q, start, end);
        let fit = ols_with_intercept(&design, &target)?;
        if fit.aic < best.1 || (best.1 == f64::INFINITY && q == lags[0]) {
            best = (q, fit.aic);
        }
    }
    Ok(best.0)
}

/// Dynamic screening: per predictor, pick a lag order by AIC and score the lagged
/// regression by R² on a sample common to all predictors.
pub fn dynamic_screen(
    x: &Matrix,
    y: &[f64],
    h: usize,
    keep_fraction: f64,
    candidate_lags: &[usize],
) -> Result<ScreenResult> {
    check_inputs(x, y, h)?;
    let lags = normalize_lags(candidate_lags)?;
    let k = keep_count(keep_fraction, x.rows())?;
    let q_max = *lags.last().unwrap();
    let (start, end) = common_sample(y.len(), h, q_max)?;
    let mut scores = Vec::with_capacity(x.rows());
    let mut orders = Vec::with_capacity(x.rows());
    for j in 0..x.rows() {
        let row = x.row(j);
        let q = select_lag(row, y, h, &lags)?;
        let (design, target) = lag_design(row, y, h, q, start, end);
        let fit = ols_with_intercept(&design, &target)?;
        scores.push(fit.r_squared);
        orders.push(q);
    }
    let selected = top_k(&scores, k);
    let sel_lags = selected.iter().map(|&j| orders[j]).collect();
    Ok(ScreenResult {
        scores,
        selected,
        keep_fraction,
        lags: Some(sel_lags),
    })
}
