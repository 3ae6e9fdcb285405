//! Supervised scaling of screened predictors by their predictive coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ols_no_intercept, ols_with_intercept, Matrix};
use crate::screening::{common_sample, lag_design};

/// Coefficients used to scale one predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlopeRecord {
    Static { slope: f64 },
    /// `gammas[l]` multiplies `x_{t−l}`; the intercept is not part of the scaled value.
    Dynamic { intercept: f64, gammas: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledPanel {
    /// k×T_eff
    pub panel: Matrix,
    pub source_indices: Vec<usize>,
    pub slopes: Vec<SlopeRecord>,
    /// Original time index of panel column 0.
    pub time_offset: usize,
}

impl ScaledPanel {
    /// Wraps an unscaled panel (plain PCA / screened PCA paths).
    pub fn unscaled(panel: Matrix, source_indices: Vec<usize>) -> Self {
        let k = panel.rows();
        Self {
            panel,
            source_indices,
            slopes: vec![SlopeRecord::Static { slope: 1.0 }; k],
            time_offset: 0,
        }
    }

    pub fn with_source_indices(mut self, idx: Vec<usize>) -> Self {
        debug_assert_eq!(idx.len(), self.panel.rows());
        self.source_indices = idx;
        self
    }

    pub fn n_periods(&self) -> usize {
        self.panel.cols()
    }
}

/// Scales each row by its no-intercept slope from regressing `y_{t+h}` on `x_{j,t}`.
/// The scaled rows cover all `T` periods.
pub fn static_scale(x_sel: &Matrix, y: &[f64], h: usize) -> Result<ScaledPanel> {
    let t = y.len();
    if x_sel.cols() != t {
        return Err(Error::DimensionMismatch(format!(
            "panel has {} periods, target has {t}",
            x_sel.cols()
        )));
    }
    if t <= h + 1 {
        return Err(Error::HorizonTooLarge { h, t });
    }
    let mut panel = Matrix::zeros(x_sel.rows(), t);
    let mut slopes = Vec::with_capacity(x_sel.rows());
    for j in 0..x_sel.rows() {
        let row = x_sel.row(j);
        let phi = ols_no_intercept(&row[..t - h], &y[h..])?;
        for (o, v) in panel.row_mut(j).iter_mut().zip(row) {
            *o = phi * v;
        }
        slopes.push(SlopeRecord::Static { slope: phi });
    }
    Ok(ScaledPanel {
        panel,
        source_indices: (0..x_sel.rows()).collect(),
        slopes,
        time_offset: 0,
    })
}

/// Scales each row by its fitted lag polynomial `Σ_l γ̂_l x_{t−l}`.
///
/// Coefficients are refit per row (own lag order, with intercept) over the sample
/// common to the largest order. Output columns cover `t = q_max−1, …, T−1`
/// (0-based), so `time_offset = q_max − 1`.
pub fn dynamic_scale(x_sel: &Matrix, y: &[f64], h: usize, lags: &[usize]) -> Result<ScaledPanel> {
    let t = y.len();
    if x_sel.cols() != t {
        return Err(Error::DimensionMismatch(format!(
            "panel has {} periods, target has {t}",
            x_sel.cols()
        )));
    }
    if lags.len() != x_sel.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} lag orders for {} rows",
            lags.len(),
            x_sel.rows()
        )));
    }
    if lags.iter().any(|&q| q == 0) {
        return Err(Error::ConfigInvalid("lag orders must be positive".into()));
    }
    if t <= h + 1 {
        return Err(Error::HorizonTooLarge { h, t });
    }
    let q_max = lags.iter().copied().max().unwrap_or(1);
    let (start, end) = common_sample(t, h, q_max)?;
    let offset = q_max - 1;
    let mut panel = Matrix::zeros(x_sel.rows(), t - offset);
    let mut slopes = Vec::with_capacity(x_sel.rows());
    for (i, &q) in lags.iter().enumerate() {
        let row = x_sel.row(i);
        let (design, target) = lag_design(row, y, h, q, start, end);
        let fit = ols_with_intercept(&design, &target)?;
        let out = panel.row_mut(i);
        for (c, s) in (offset..t).enumerate() {
            out[c] = fit
                .coefficients
                .iter()
                .enumerate()
                .map(|(l, g)| g * row[s - l])
                .sum();
        }
        slopes.push(SlopeRecord::Dynamic {
            intercept: fit.intercept,
            gammas: fit.coefficients,
        });
    }
    Ok(ScaledPanel {
        panel,
        source_indices: (0..x_sel.rows()).collect(),
        slopes,
        time_offset: offset,
    })
}
