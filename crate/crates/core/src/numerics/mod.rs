//! Dense linear algebra and statistics kernels shared by the rest of the crate.

pub mod eigen;
pub mod matrix;
pub mod rng;

pub use eigen::{fix_column_signs, svd, sym_eigen, sym_spectral_norm, EigenDecomposition, Svd};
pub use matrix::{dot, Matrix};
pub use rng::{draw_normal, SeededRng};

use crate::error::{Error, Result};

/// Numerical tolerances used across the crate, kept in one place.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Variance below which a series counts as constant.
    pub constant_variance: f64,
    /// Sum of squares below which a regressor is degenerate.
    pub degenerate_regressor: f64,
    /// Relative pivot size below which normal equations are singular.
    pub singular_pivot: f64,
    /// Allowed asymmetry (relative to the Frobenius norm) for `sym_eigen`.
    pub symmetry: f64,
    /// Jacobi stops once the off-diagonal norm falls below this fraction of ‖A‖_F.
    pub jacobi_off_diagonal: f64,
    pub jacobi_max_sweeps: usize,
    /// Eigen/singular values below this fraction of the largest are numerically zero.
    pub rank_relative: f64,
    /// Coordinate descent stops when no coefficient moves more than this.
    pub cd_coefficient_change: f64,
    pub cd_max_sweeps: usize,
    /// Coefficients with magnitude at or below this are treated as zero in support checks.
    pub support_threshold: f64,
}

pub const TOL: Tolerances = Tolerances {
    constant_variance: 1e-12,
    degenerate_regressor: 1e-12,
    singular_pivot: 1e-10,
    symmetry: 1e-10,
    jacobi_off_diagonal: 1e-12,
    jacobi_max_sweeps: 100,
    rank_relative: 1e-12,
    cd_coefficient_change: 1e-9,
    cd_max_sweeps: 10_000,
    support_threshold: 1e-8,
};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance (divisor `n`).
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Mean and population standard deviation, failing on constant input.
pub fn moments(series: &[f64]) -> Result<(f64, f64)> {
    if series.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: series.len(),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "series".into(),
        });
    }
    let m = mean(series);
    let n = series.len() as f64;
    let var = series.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    // constancy is judged on the unbiased variance
    if var * n / (n - 1.0) < TOL.constant_variance {
        return Err(Error::ConstantSeries { variance: var });
    }
    Ok((m, var.sqrt()))
}

/// Centers to mean zero and scales to unit population variance.
pub fn standardize(series: &[f64]) -> Result<Vec<f64>> {
    let (m, sd) = moments(series)?;
    Ok(series.iter().map(|v| (v - m) / sd).collect())
}

/// Least-squares slope of `y` on `x` without an intercept: Σxy / Σx².
pub fn ols_no_intercept(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "x has {} values, y has {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: x.len(),
        });
    }
    let sxx = dot(x, x);
    if sxx < TOL.degenerate_regressor {
        return Err(Error::DegenerateRegressor);
    }
    Ok(dot(x, y) / sxx)
}

/// Result of a least-squares fit with intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub r_squared: f64,
    /// `n·ln(RSS/n) + 2(q+1)`; `-inf` for an exact fit.
    pub aic: f64,
    pub rss: f64,
}

/// Regresses `y` on the columns of `x` plus an intercept.
///
/// Solved on centred data, so the intercept never enters the pivoting.
/// A saturated design (`T = q + 1`) is allowed and fits exactly.
pub fn ols_with_intercept(x: &Matrix, y: &[f64]) -> Result<OlsFit> {
    let t = x.rows();
    let q = x.cols();
    if y.len() != t {
        return Err(Error::DimensionMismatch(format!(
            "design has {t} rows, target has {}",
            y.len()
        )));
    }
    if t < q + 1 {
        return Err(Error::TooShort {
            required: q + 1,
            actual: t,
        });
    }
    let ybar = mean(y);
    let xbar: Vec<f64> = (0..q).map(|j| (0..t).map(|i| x[(i, j)]).sum::<f64>() / t as f64).collect();
    let mut xtx = Matrix::zeros(q, q);
    let mut xty = vec![0.0; q];
    for i in 0..t {
        let row = x.row(i);
        let yc = y[i] - ybar;
        for a in 0..q {
            let xa = row[a] - xbar[a];
            xty[a] += xa * yc;
            for b in a..q {
                xtx[(a, b)] += xa * (row[b] - xbar[b]);
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
    }
    let beta = solve_spd_like(&xtx, &xty)?;
    let intercept = ybar - dot(&xbar, &beta);
    let mut rss = 0.0;
    let mut tss = 0.0;
    for i in 0..t {
        let fitted = intercept + dot(x.row(i), &beta);
        rss += (y[i] - fitted).powi(2);
        tss += (y[i] - ybar).powi(2);
    }
    let r_squared = if tss <= f64::MIN_POSITIVE {
        0.0
    } else {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    };
    let n = t as f64;
    let aic = if rss > 0.0 {
        n * (rss / n).ln() + 2.0 * (q as f64 + 1.0)
    } else {
        f64::NEG_INFINITY
    };
    Ok(OlsFit {
        coefficients: beta,
        intercept,
        r_squared,
        aic,
        rss,
    })
}

/// Gaussian elimination with partial pivoting for a small square system.
/// Fails with `RankDeficient` when a pivot is tiny relative to the diagonal scale.
pub fn solve_spd_like(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::DimensionMismatch("solve needs a square system".into()));
    }
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap();
        let pv = m[(piv, col)];
        if pv.abs() <= TOL.singular_pivot * scale.max(f64::MIN_POSITIVE) || scale == 0.0 {
            return Err(Error::RankDeficient { pivot: pv.abs() });
        }
        if piv != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(piv, k)];
                m[(piv, k)] = tmp;
            }
            rhs.swap(col, piv);
        }
        for r in (col + 1)..n {
            let f = m[(r, col)] / m[(col, col)];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[(r, k)] -= f * m[(col, k)];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| m[(i, k)] * x[k]).sum();
        x[i] = (rhs[i] - s) / m[(i, i)];
    }
    Ok(x)
}
