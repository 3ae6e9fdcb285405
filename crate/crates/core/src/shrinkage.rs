//! Penalized regression of the lead target on factors by cyclic coordinate descent.
//!
//! The objective is
//!
//! ```text
//! (1/T) Σ_{t=1}^{T−h} (y_{t+h} − θᵀf_t)² + ψ [a‖θ‖₁ + (1−a)‖θ‖²/2]
//! ```
//!
//! with `T` the number of factor rows (not the number of pairs). Because the loss
//! carries `1/T` and no `1/2`, the coordinate update is the soft-threshold
//! `S(z_j, ψa/2) / (s_j + ψ(1−a)/2)` where `z_j = (1/T)Σ f_{tj} r_t + s_j θ_j` and
//! `s_j = (1/T)Σ f_{tj}²`. Dropping the factor of two here would silently halve
//! the penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, solve_spd_like, Matrix, TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageFit {
    pub coefficients: Vec<f64>,
    /// Always zero: factor regressions carry no intercept.
    pub intercept: f64,
    pub penalty: f64,
    pub alpha_mix: f64,
    pub active_set: Vec<usize>,
    pub objective: f64,
    /// Objective after initialization and after every coordinate pass.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ShrinkageFit {
    /// Turns a fit that hit the sweep limit into `NotConverged`.
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                sweeps: self.iterations,
            })
        }
    }

    pub fn predict(&self, f_row: &[f64]) -> f64 {
        dot(&self.coefficients, f_row) + self.intercept
    }

    /// Indices with `|θ_j|` above the support threshold.
    pub fn support(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > TOL.support_threshold)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Column-major view of the `(f_t, y_{t+h})` pairs.
struct Problem {
    cols: Vec<Vec<f64>>,
    target: Vec<f64>,
    col_sq: Vec<f64>,
    inv_t: f64,
}

impl Problem {
    fn new(f: &Matrix, y: &[f64], h: usize) -> Result<Self> {
        let t = f.rows();
        if y.len() != t {
            return Err(Error::DimensionMismatch(format!(
                "factor matrix has {t} rows, target has {}",
                y.len()
            )));
        }
        if t <= h {
            return Err(Error::InsufficientData(format!(
                "{t} factor rows leave no pairs at horizon {h}"
            )));
        }
        if !f.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "shrinkage inputs".into(),
            });
        }
        Ok(Self::from_rows(f, y, h, t))
    }

    /// Pairs from the first `rows` factor rows only.
    fn from_rows(f: &Matrix, y: &[f64], h: usize, rows: usize) -> Self {
        let n = rows - h;
        let inv_t = 1.0 / rows as f64;
        let cols: Vec<Vec<f64>> = (0..f.cols())
            .map(|j| (0..n).map(|s| f[(s, j)]).collect())
            .collect();
        let col_sq = cols.iter().map(|c| dot(c, c) * inv_t).collect();
        Self {
            cols,
            target: y[h..rows].to_vec(),
            col_sq,
            inv_t,
        }
    }

    fn objective(&self, theta: &[f64], resid: &[f64], psi: f64, alpha: f64) -> f64 {
        let l1: f64 = theta.iter().map(|v| v.abs()).sum();
        let l2: f64 = theta.iter().map(|v| v * v).sum();
        dot(resid, resid) * self.inv_t + psi * (alpha * l1 + (1.0 - alpha) * 0.5 * l2)
    }

    /// Largest `|(1/T) Σ f_{tj} y_{t+h}|`.
    fn max_correlation(&self) -> f64 {
        self.cols
            .iter()
            .map(|c| (dot(c, &self.target) * self.inv_t).abs())
            .fold(0.0, f64::max)
    }

    fn solve(&self, psi: f64, alpha: f64, init: Option<&[f64]>) -> ShrinkageFit {
        let r = self.cols.len();
        let mut theta = init.map_or_else(|| vec![0.0; r], <[f64]>::to_vec);
        let mut resid = self.target.clone();
        for (j, c) in self.cols.iter().enumerate() {
            if theta[j] != 0.0 {
                resid.iter_mut().zip(c).for_each(|(e, f)| *e -= theta[j] * f);
            }
        }
        let threshold = 0.5 * psi * alpha;
        let ridge = 0.5 * psi * (1.0 - alpha);
        let mut trace = vec![self.objective(&theta, &resid, psi, alpha)];
        let mut passes = 0usize;
        let mut converged = false;

        let update = |j: usize, theta: &mut [f64], resid: &mut [f64]| -> f64 {
            let s = self.col_sq[j];
            let old = theta[j];
            let new = if s > 0.0 {
                let z = dot(&self.cols[j], resid) * self.inv_t + s * old;
                soft_threshold(z, threshold) / (s + ridge)
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                resid.iter_mut().zip(&self.cols[j]).for_each(|(e, f)| *e -= delta * f);
                theta[j] = new;
            }
            delta.abs()
        };

        'outer: while passes < TOL.cd_max_sweeps {
            // full pass over every coordinate
            let mut max_change = 0.0f64;
            for j in 0..r {
                max_change = max_change.max(update(j, &mut theta, &mut resid));
            }
            passes += 1;
            trace.push(self.objective(&theta, &resid, psi, alpha));
            if max_change < TOL.cd_coefficient_change {
                converged = true;
                break;
            }
            // iterate on the active set until it settles, then re-check everything
            let active: Vec<usize> = (0..r).filter(|&j| theta[j] != 0.0).collect();
            if active.len() == r {
                continue;
            }
            if !self.active_passes(&active, &mut theta, &mut resid, psi, alpha, &mut passes, &mut trace) {
                break 'outer;
            }
        }
        let objective = *trace.last().unwrap();
        ShrinkageFit {
            active_set: (0..r).filter(|&j| theta[j] != 0.0).collect(),
            coefficients: theta,
            intercept: 0.0,
            penalty: psi,
            alpha_mix: alpha,
            objective,
            objective_trace: trace,
            iterations: passes,
            converged,
        }
    }
}

impl Problem {
    /// Coordinate passes restricted to `active`, using the active Gram block so each
    /// update costs `O(|A|)`; the residual is refreshed once at the end.
    /// Returns `false` if the sweep budget ran out.
    #[allow(clippy::too_many_arguments)]
    fn active_passes(
        &self,
        active: &[usize],
        theta: &mut [f64],
        resid: &mut [f64],
        psi: f64,
        alpha: f64,
        passes: &mut usize,
        trace: &mut Vec<f64>,
    ) -> bool {
        let m = active.len();
        let threshold = 0.5 * psi * alpha;
        let ridge = 0.5 * psi * (1.0 - alpha);
        let mut gram = vec![0.0; m * m];
        for a in 0..m {
            for b in a..m {
                let g = dot(&self.cols[active[a]], &self.cols[active[b]]) * self.inv_t;
                gram[a * m + b] = g;
                gram[b * m + a] = g;
            }
        }
        // grad[a] = (1/T) f_aᵀ resid, kept current as coefficients move
        let grad_entry: Vec<f64> = active.iter().map(|&j| dot(&self.cols[j], resid) * self.inv_t).collect();
        let mut grad = grad_entry.clone();
        let start: Vec<f64> = active.iter().map(|&j| theta[j]).collect();
        let rss0 = dot(resid, resid) * self.inv_t;
        let mut ok = true;
        loop {
            if *passes >= TOL.cd_max_sweeps {
                ok = false;
                break;
            }
            let mut change = 0.0f64;
            for a in 0..m {
                let j = active[a];
                let s = gram[a * m + a];
                let old = theta[j];
                let new = if s > 0.0 {
                    soft_threshold(grad[a] + s * old, threshold) / (s + ridge)
                } else {
                    0.0
                };
                let delta = new - old;
                if delta != 0.0 {
                    theta[j] = new;
                    let row = &gram[a * m..(a + 1) * m];
                    grad.iter_mut().zip(row).for_each(|(g, gab)| *g -= delta * gab);
                    change = change.max(delta.abs());
                }
            }
            *passes += 1;
            if *passes % 16 == 0 && self.try_sign_stable_solve(active, &gram, &grad, theta, threshold, ridge) {
                // grad must follow the jump
                grad = self.active_gradient(active, theta, &start, &gram, &grad_entry);
                change = 0.0;
            }
            trace.push(objective_from_moves(active, theta, &start, rss0, &grad_entry, &grad, psi, alpha));
            if change < TOL.cd_coefficient_change {
                break;
            }
        }
        for (&j, s0) in active.iter().zip(&start) {
            let delta = theta[j] - s0;
            if delta != 0.0 {
                resid.iter_mut().zip(&self.cols[j]).for_each(|(e, f)| *e -= delta * f);
            }
        }
        ok
    }
}

impl Problem {
    /// Gradient on the active set after moving from `start` to `theta`.
    fn active_gradient(&self, active: &[usize], theta: &[f64], start: &[f64], gram: &[f64], entry: &[f64]) -> Vec<f64> {
        let m = active.len();
        let d: Vec<f64> = active.iter().zip(start).map(|(&j, s0)| theta[j] - s0).collect();
        (0..m)
            .map(|a| entry[a] - (0..m).map(|b| gram[a * m + b] * d[b]).sum::<f64>())
            .collect()
    }

    /// Solves the stationarity equations on the active set for the current signs.
    /// Accepts the solution only if every sign is preserved.
    fn try_sign_stable_solve(
        &self,
        active: &[usize],
        gram: &[f64],
        grad: &[f64],
        theta: &mut [f64],
        threshold: f64,
        ridge: f64,
    ) -> bool {
        let m = active.len();
        // Gθ_new + ridge θ_new = c − threshold·sign, with c = grad + Gθ
        let mut a = Matrix::zeros(m, m);
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            let mut c = grad[i];
            for k in 0..m {
                a[(i, k)] = gram[i * m + k];
                c += gram[i * m + k] * theta[active[k]];
            }
            a[(i, i)] += ridge;
            rhs[i] = c - threshold * theta[active[i]].signum();
        }
        let Ok(sol) = solve_spd_like(&a, &rhs) else {
            return false;
        };
        let consistent = sol
            .iter()
            .zip(active)
            .all(|(v, &j)| v.is_finite() && *v != 0.0 && v.signum() == theta[j].signum());
        if consistent {
            for (v, &j) in sol.iter().zip(active) {
                theta[j] = *v;
            }
        }
        consistent
    }
}

/// Penalized objective from the active-set move, using
/// `RSS/T = rss0 − dᵀg_entry − dᵀg_now` for a move `d`.
#[allow(clippy::too_many_arguments)]
fn objective_from_moves(
    active: &[usize],
    theta: &[f64],
    start: &[f64],
    rss0: f64,
    entry: &[f64],
    now: &[f64],
    psi: f64,
    alpha: f64,
) -> f64 {
    let mut rss = rss0;
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for (a, (&j, s0)) in active.iter().zip(start).enumerate() {
        let d = theta[j] - s0;
        rss -= d * (entry[a] + now[a]);
        l1 += theta[j].abs();
        l2 += theta[j] * theta[j];
    }
    rss.max(0.0) + psi * (alpha * l1 + (1.0 - alpha) * 0.5 * l2)
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn check_penalty(psi: f64, alpha_mix: f64) -> Result<()> {
    if !(psi >= 0.0 && psi.is_finite()) {
        return Err(Error::ConfigInvalid(format!("penalty {psi} must be finite and ≥ 0")));
    }
    if !(0.0..=1.0).contains(&alpha_mix) {
        return Err(Error::ConfigInvalid(format!("alpha_mix {alpha_mix} outside [0, 1]")));
    }
    Ok(())
}

/// Elastic-net fit of `y_{t+h}` on `f_t`; `alpha_mix = 1` is the Lasso.
///
/// A fit that exhausts the sweep budget is still returned, with `converged = false`.
pub fn enet_fit(f: &Matrix, y: &[f64], h: usize, psi: f64, alpha_mix: f64) -> Result<ShrinkageFit> {
    check_penalty(psi, alpha_mix)?;
    let problem = Problem::new(f, y, h)?;
    Ok(problem.solve(psi, alpha_mix, None))
}

/// Lasso fit of `y_{t+h}` on `f_t` with penalty `psi`.
pub fn lasso_fit(f: &Matrix, y: &[f64], h: usize, psi: f64) -> Result<ShrinkageFit> {
    enet_fit(f, y, h, psi, 1.0)
}

/// Smallest penalty giving the all-zero Lasso solution: `2·max_j |(1/T)Σ f_{tj} y_{t+h}|`.
pub fn null_penalty(f: &Matrix, y: &[f64], h: usize) -> Result<f64> {
    Ok(2.0 * Problem::new(f, y, h)?.max_correlation())
}

/// `n` log-spaced penalties from the null threshold (scaled by `1/alpha_mix`) down
/// to `1e-3` of it, or `1e-2` when there are at least as many columns as pairs.
pub fn default_psi_grid(f: &Matrix, y: &[f64], h: usize, alpha_mix: f64, n: usize) -> Result<Vec<f64>> {
    let top = null_penalty(f, y, h)? / alpha_mix.max(1e-3);
    let floor = if f.cols() + h >= f.rows() { 1e-2 } else { 1e-3 };
    if top <= 0.0 || n == 0 {
        return Ok(vec![0.0]);
    }
    if n == 1 {
        return Ok(vec![top]);
    }
    let (hi, lo) = (top.ln(), (top * floor).ln());
    Ok((0..n)
        .map(|i| (hi + (lo - hi) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Number of penalties in the automatic grid.
pub const DEFAULT_PSI_GRID_LEN: usize = 50;

/// Cross-validated penalty and per-penalty mean squared one-step-ahead errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyCv {
    /// Minimizer of the CV error.
    pub best_psi: f64,
    /// Largest penalty whose CV error is within one standard error of the minimum.
    pub one_se_psi: f64,
    pub cv_errors: Vec<f64>,
    /// Standard error of each mean, across validation origins.
    pub cv_se: Vec<f64>,
}

/// Expanding-window penalty selection.
///
/// For every origin `t = min_train, …, T_eff − h` the model is fit on the first `t`
/// factor rows and predicts `y` at row `t − 1 + h` from row `t − 1`. The penalty with
/// the smallest mean squared error wins; ties go to the larger penalty.
pub fn cv_penalty(
    f: &Matrix,
    y: &[f64],
    h: usize,
    psi_grid: &[f64],
    min_train: usize,
    alpha_mix: f64,
) -> Result<PenaltyCv> {
    if min_train < f.cols() + 5 {
        return Err(Error::InsufficientData(format!(
            "min_train {min_train} below factor count {} + 5",
            f.cols()
        )));
    }
    cv_penalty_wide(f, y, h, psi_grid, min_train, alpha_mix)
}

/// Same as [`cv_penalty`] without the `min_train ≥ r + 5` floor, for designs with
/// more columns than rows (raw-predictor baselines).
pub fn cv_penalty_wide(
    f: &Matrix,
    y: &[f64],
    h: usize,
    psi_grid: &[f64],
    min_train: usize,
    alpha_mix: f64,
) -> Result<PenaltyCv> {
    if psi_grid.is_empty() {
        return Err(Error::ConfigInvalid("empty penalty grid".into()));
    }
    if psi_grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::ConfigInvalid("penalty grid must be descending".into()));
    }
    for &psi in psi_grid {
        check_penalty(psi, alpha_mix)?;
    }
    let t_eff = f.rows();
    if y.len() != t_eff {
        return Err(Error::DimensionMismatch(format!(
            "factor matrix has {t_eff} rows, target has {}",
            y.len()
        )));
    }
    if min_train < h + 2 || t_eff < h || min_train > t_eff - h {
        return Err(Error::InsufficientData(format!(
            "no validation origins: min_train {min_train}, {t_eff} rows, horizon {h}"
        )));
    }
    let sq = origin_errors(f, y, h, psi_grid, min_train, alpha_mix);
    let n = sq.len() as f64;
    let mut cv_errors = Vec::with_capacity(psi_grid.len());
    let mut cv_se = Vec::with_capacity(psi_grid.len());
    for i in 0..psi_grid.len() {
        let m = sq.iter().map(|row| row[i]).sum::<f64>() / n;
        let var = if n > 1.0 {
            sq.iter().map(|row| (row[i] - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        cv_errors.push(m);
        cv_se.push((var / n).sqrt());
    }
    let mut best = 0usize;
    for (i, e) in cv_errors.iter().enumerate() {
        if *e < cv_errors[best] {
            best = i;
        }
    }
    let bound = cv_errors[best] + cv_se[best];
    let one_se = cv_errors.iter().position(|e| *e <= bound).unwrap_or(best);
    Ok(PenaltyCv {
        best_psi: psi_grid[best],
        one_se_psi: psi_grid[one_se],
        cv_errors,
        cv_se,
    })
}

/// Squared errors per validation origin (rows) and penalty (columns).
fn origin_errors(f: &Matrix, y: &[f64], h: usize, psi_grid: &[f64], min_train: usize, alpha: f64) -> Vec<Vec<f64>> {
    let t_eff = f.rows();
    let mut out = Vec::with_capacity(t_eff + 1 - h - min_train);
    for t in min_train..=t_eff - h {
        let mut row = Vec::with_capacity(psi_grid.len());
        let problem = Problem::from_rows(f, y, h, t);
        let last = f.row(t - 1);
        let actual = y[t - 1 + h];
        let mut warm: Option<Vec<f64>> = None;
        for &psi in psi_grid {
            let fit = problem.solve(psi, alpha, warm.as_deref());
            let err = actual - fit.predict(last);
            row.push(err * err);
            warm = Some(fit.coefficients);
        }
        out.push(row);
    }
    out
}

/// Largest KKT violation of a pure-Lasso fit:
/// active coordinates need `|g_j| = ψ`, inactive ones `|g_j| ≤ ψ`, where
/// `g_j = (2/T) Σ f_{tj}(y_{t+h} − θᵀf_t)`.
pub fn kkt_violation(f: &Matrix, y: &[f64], h: usize, fit: &ShrinkageFit) -> Result<f64> {
    let p = Problem::new(f, y, h)?;
    let mut resid = p.target.clone();
    for (j, c) in p.cols.iter().enumerate() {
        resid.iter_mut().zip(c).for_each(|(e, v)| *e -= fit.coefficients[j] * v);
    }
    let mut worst = 0.0f64;
    for (j, c) in p.cols.iter().enumerate() {
        let g = 2.0 * dot(c, &resid) * p.inv_t;
        let v = if fit.coefficients[j] != 0.0 {
            (g - fit.penalty * fit.coefficients[j].signum()).abs()
        } else {
            (g.abs() - fit.penalty).max(0.0)
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Objective value at an arbitrary coefficient vector.
pub fn enet_objective(f: &Matrix, y: &[f64], h: usize, theta: &[f64], psi: f64, alpha_mix: f64) -> Result<f64> {
    let p = Problem::new(f, y, h)?;
    let mut resid = p.target.clone();
    for (j, c) in p.cols.iter().enumerate() {
        resid.iter_mut().zip(c).for_each(|(e, v)| *e -= theta[j] * v);
    }
    Ok(p.objective(theta, &resid, psi, alpha_mix))
}
