//! PCA factor extraction on the T×T Gram matrix of a scaled panel, the
//! eigenvalue-ratio factor count, and eigenvalue shares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fix_column_signs, sym_eigen, Matrix, TOL};
use crate::scaling::ScaledPanel;

/// Factor-count grid used by Lasso-based sweeps.
pub const FACTOR_COUNT_GRID: [usize; 7] = [5, 7, 10, 15, 20, 25, 30];

/// Default number of factors kept for Lasso selection.
pub const DEFAULT_FACTORS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    /// T_eff×r, normalized so that `FᵀF / T_eff = I`.
    pub factors: Matrix,
    /// k×r, `Ẋ F / T_eff`.
    pub loadings: Matrix,
    /// Full descending spectrum of `ẊᵀẊ / k`.
    pub eigenvalues: Vec<f64>,
    pub time_offset: usize,
}

impl FactorModel {
    pub fn n_factors(&self) -> usize {
        self.factors.cols()
    }
}

/// Full descending spectrum of `Σ̃ = ẊᵀẊ / k` (length T) and T×m eigenvectors for
/// the nonzero part. When `k < T` the k×k dual `ẊẊᵀ / k` is diagonalized instead.
fn gram_spectrum(panel: &ScaledPanel) -> Result<(Vec<f64>, Matrix)> {
    let k = panel.panel.rows();
    let t = panel.panel.cols();
    if k == 0 || t == 0 {
        return Err(Error::InsufficientData("empty scaled panel".into()));
    }
    if k >= t {
        let eig = sym_eigen(&panel.panel.gram_cols().scale(1.0 / k as f64))?;
        return Ok((eig.eigenvalues, eig.eigenvectors));
    }
    let dual = sym_eigen(&panel.panel.gram_rows().scale(1.0 / k as f64))?;
    let rank = numerical_rank(&dual.eigenvalues);
    let xt = panel.panel.transpose();
    let mut vecs = Matrix::zeros(t, rank);
    for i in 0..rank {
        let u = dual.eigenvectors.column(i);
        let v = xt.mat_vec(&u);
        let norm = (k as f64 * dual.eigenvalues[i]).sqrt();
        for (s, vs) in v.iter().enumerate() {
            vecs[(s, i)] = vs / norm;
        }
    }
    fix_column_signs(&mut vecs);
    let mut eigenvalues = dual.eigenvalues;
    eigenvalues.resize(t, 0.0);
    Ok((eigenvalues, vecs))
}

/// Count of eigenvalues above the relative rank threshold.
pub fn numerical_rank(eigenvalues: &[f64]) -> usize {
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    eigenvalues.iter().filter(|&&l| l > TOL.rank_relative * top).count()
}

/// Extracts `r` principal-component factors from the scaled panel.
pub fn extract_factors(panel: &ScaledPanel, r: usize) -> Result<FactorModel> {
    extract_factors_with(panel, |_| Ok(r))
}

/// Like [`extract_factors`], with `r` chosen from the full spectrum.
pub fn extract_factors_with<F>(panel: &ScaledPanel, choose: F) -> Result<FactorModel>
where
    F: FnOnce(&[f64]) -> Result<usize>,
{
    let t = panel.panel.cols();
    let (eigenvalues, vecs) = gram_spectrum(panel)?;
    let rank = numerical_rank(&eigenvalues);
    let r = choose(&eigenvalues)?;
    if r == 0 || r > rank {
        return Err(Error::RankTooHigh { requested: r, rank });
    }
    let factors = vecs.slice_cols(0, r).scale((t as f64).sqrt());
    let loadings = panel.panel.matmul(&factors)?.scale(1.0 / t as f64);
    Ok(FactorModel {
        factors,
        loadings,
        eigenvalues,
        time_offset: panel.time_offset,
    })
}

/// Eigenvalue-ratio estimator: the `i ≤ R` minimizing `λ_{i+1}/λ_i` (ties to the smallest `i`).
///
/// `R` is capped so that both eigenvalues of every ratio are numerically nonzero.
pub fn estimate_num_factors(eigenvalues: &[f64], max_factors: usize) -> Result<usize> {
    if eigenvalues.is_empty() || eigenvalues[0] <= 0.0 || !eigenvalues[0].is_finite() {
        return Err(Error::EmptySpectrum);
    }
    let rank = numerical_rank(eigenvalues);
    let cap = max_factors.min(rank.saturating_sub(1)).min(eigenvalues.len() - 1);
    if cap == 0 {
        return Ok(1);
    }
    let mut best = (1usize, f64::INFINITY);
    for i in 1..=cap {
        let ratio = eigenvalues[i] / eigenvalues[i - 1];
        if ratio < best.1 {
            best = (i, ratio);
        }
    }
    Ok(best.0)
}

/// Leading eigenvalues as fractions of the full-spectrum sum.
pub fn shares_from_spectrum(eigenvalues: &[f64], top_n: usize) -> Vec<f64> {
    let total: f64 = eigenvalues.iter().map(|l| l.max(0.0)).sum();
    eigenvalues
        .iter()
        .take(top_n)
        .map(|l| if total > 0.0 { l.max(0.0) / total } else { 0.0 })
        .collect()
}

/// Top `top_n` eigenvalue shares of the scaled panel's Gram matrix.
pub fn eigenvalue_shares(panel: &ScaledPanel, top_n: usize) -> Result<Vec<f64>> {
    let (eigenvalues, _) = gram_spectrum(panel)?;
    Ok(shares_from_spectrum(&eigenvalues, top_n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn scaled(m: Matrix) -> ScaledPanel {
        let k = m.rows();
        ScaledPanel::unscaled(m, (0..k).collect())
    }

    #[test]
    fn rank_one_panel() {
        let a = [1.0, -2.0, 0.5];
        let b = [0.3, -1.0, 2.0, 0.7, -0.4];
        let m = Matrix::from_rows(&a.iter().map(|ai| b.iter().map(|bj| ai * bj).collect()).collect::<Vec<_>>()).unwrap();
        let p = scaled(m);
        let shares = eigenvalue_shares(&p, 3).unwrap();
        assert!((shares[0] - 1.0).abs() < 1e-12);
        assert!(shares[1].abs() < 1e-12);
        let fm = extract_factors(&p, 1).unwrap();
        let f = fm.factors.column(0);
        let ratio = f[0] / b[0];
        for (fi, bi) in f.iter().zip(b) {
            assert!((fi - ratio * bi).abs() < 1e-10);
        }
        assert!(matches!(extract_factors(&p, 2), Err(Error::RankTooHigh { rank: 1, .. })));
    }

    #[test]
    fn orthonormal_factors_and_loadings() {
        let mut rng = SeededRng::new(3, 0);
        let m = Matrix::from_vec(8, 12, rng.normal_vec(96)).unwrap();
        let p = scaled(m.clone());
        let fm = extract_factors(&p, 3).unwrap();
        let t = 12.0;
        let ftf = fm.factors.transpose().matmul(&fm.factors).unwrap().scale(1.0 / t);
        assert!(ftf.sub(&Matrix::identity(3)).unwrap().frobenius_norm() <= 1e-8);
        let lam = m.matmul(&fm.factors).unwrap().scale(1.0 / t);
        assert!(lam.max_abs_diff(&fm.loadings) <= 1e-10);
        assert!(fm.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(fm.eigenvalues.iter().all(|&l| l > -1e-10));
    }

    #[test]
    fn ratio_estimator_examples() {
        assert_eq!(estimate_num_factors(&[4.0, 2.0, 1e-6, 5e-7], 3).unwrap(), 2);
        assert_eq!(estimate_num_factors(&[1.0, 1.0, 1.0, 1.0], 3).unwrap(), 1);
        assert!(matches!(estimate_num_factors(&[], 3), Err(Error::EmptySpectrum)));
        assert!(matches!(estimate_num_factors(&[0.0, 0.0], 1), Err(Error::EmptySpectrum)));
    }

    #[test]
    fn ratio_estimator_ignores_null_tail() {
        // the 0 eigenvalue must not create a spurious minimal ratio
        assert_eq!(estimate_num_factors(&[10.0, 9.0, 1.0, 0.9, 0.0], 4).unwrap(), 2);
    }

    #[test]
    fn equal_spectrum_equal_shares() {
        let p = scaled(Matrix::identity(4).scale(2.0));
        let s = eigenvalue_shares(&p, 4).unwrap();
        for v in &s {
            assert!((v - 0.25).abs() < 1e-12);
        }
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nested_models_share_columns() {
        let mut rng = SeededRng::new(8, 0);
        let p = scaled(Matrix::from_vec(6, 15, rng.normal_vec(90)).unwrap());
        let a = extract_factors(&p, 2).unwrap();
        let b = extract_factors(&p, 3).unwrap();
        assert!(a.factors.max_abs_diff(&b.factors.slice_cols(0, 2)) < 1e-12);
    }

    #[test]
    fn dual_path_matches_primal() {
        let mut rng = SeededRng::new(21, 0);
        let m = Matrix::from_vec(5, 30, rng.normal_vec(150)).unwrap();
        let p = scaled(m.clone());
        let fm = extract_factors(&p, 4).unwrap();
        let direct = sym_eigen(&m.gram_cols().scale(1.0 / 5.0)).unwrap();
        assert_eq!(fm.eigenvalues.len(), 30);
        for (a, b) in fm.eigenvalues.iter().zip(&direct.eigenvalues) {
            assert!((a - b).abs() < 1e-9);
        }
        let expect = direct.eigenvectors.slice_cols(0, 4).scale(30f64.sqrt());
        assert!(fm.factors.max_abs_diff(&expect) < 1e-7);
    }
}
