//! Monte Carlo harness: latent-factor data-generating processes, rotation
//! alignment, recovery metrics and aggregated experiment tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::extract_factors;
use crate::numerics::{dot, standardize, svd, sym_eigen, variance, Matrix, SeededRng};
use crate::pipeline::{
    expanding_window_eval, fit_regressor, standardize_window, variant_panels, FactorCount, PipelineConfig, PsiRule,
    Variant,
};
use crate::scaling::{ScaledPanel, SlopeRecord};
use crate::screening::KEEP_FRACTION_GRID;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub dgp: u8,
    pub p: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub r: usize,
    pub h: usize,
    pub alphas: Vec<f64>,
    #[serde(rename = "D_squared")]
    pub d_squared: Vec<f64>,
    /// Length `r` for DGP 1/2; `2r` for DGP 3 (current factors, then first lags).
    pub theta: Vec<f64>,
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub seed: u64,
}

impl DgpConfig {
    /// Default parameters of DGP 1, 2 or 3 at the given size, all factors strong.
    pub fn preset(dgp: u8, p: usize, t: usize) -> Result<Self> {
        let (r, theta, d2, lo, hi) = match dgp {
            1 => (4, vec![1.0, 0.0, 2.0, 5.0], vec![3.0, 2.0, 1.0, 0.7], 0.1, 0.5),
            2 => (4, vec![0.0, 0.0, 0.0, 5.0], vec![3.0, 2.0, 1.0, 0.7], 0.1, 0.5),
            3 => (2, vec![1.0, 0.0, 0.7, 0.0], vec![1.0, 1.0], 0.8, 1.0),
            other => return Err(Error::ConfigInvalid(format!("unknown DGP {other}"))),
        };
        Ok(Self {
            dgp,
            p,
            t,
            r,
            h: 1,
            alphas: vec![1.0; r],
            d_squared: d2,
            theta,
            sigma_low: lo,
            sigma_high: hi,
            seed: 42,
        })
    }

    pub fn with_alphas(mut self, alphas: &[f64]) -> Self {
        self.alphas = alphas.to_vec();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn theta_len(&self) -> usize {
        if self.dgp == 3 {
            2 * self.r
        } else {
            self.r
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if !(1..=3).contains(&self.dgp) {
            return bad(format!("unknown DGP {}", self.dgp));
        }
        if self.p == 0 || self.r == 0 || self.h == 0 {
            return bad("p, r and h must be positive".into());
        }
        if self.t < self.h + 4 {
            return bad(format!("T = {} is too short for horizon {}", self.t, self.h));
        }
        if self.alphas.len() != self.r || self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad(format!("alphas must be {} values in [0, 1]", self.r));
        }
        if self.d_squared.len() != self.r || self.d_squared.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return bad(format!("D_squared must be {} positive values", self.r));
        }
        if self.theta.len() != self.theta_len() || self.theta.iter().any(|v| !v.is_finite()) {
            return bad(format!("theta must have {} finite entries", self.theta_len()));
        }
        if !(self.sigma_low >= 0.0 && self.sigma_low <= self.sigma_high && self.sigma_high.is_finite()) {
            return bad("noise bounds must satisfy 0 <= sigma_low <= sigma_high".into());
        }
        Ok(())
    }
}

/// DGP description where everything except `dgp` falls back to the preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub dgp: u8,
    pub p: Option<usize>,
    #[serde(rename = "T")]
    pub t: Option<usize>,
    pub r: Option<usize>,
    pub h: Option<usize>,
    pub alphas: Option<Vec<f64>>,
    #[serde(rename = "D_squared")]
    pub d_squared: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub sigma_low: Option<f64>,
    pub sigma_high: Option<f64>,
    pub seed: Option<u64>,
}

impl DgpSpec {
    pub fn resolve(&self) -> Result<DgpConfig> {
        let mut c = DgpConfig::preset(self.dgp, self.p.unwrap_or(500), self.t.unwrap_or(100))?;
        if let Some(r) = self.r {
            if r != c.r && (self.alphas.is_none() || self.d_squared.is_none() || self.theta.is_none()) {
                return Err(Error::ConfigInvalid(
                    "changing r requires alphas, D_squared and theta".into(),
                ));
            }
            c.r = r;
        }
        c.h = self.h.unwrap_or(c.h);
        c.alphas = self.alphas.clone().unwrap_or(c.alphas);
        c.d_squared = self.d_squared.clone().unwrap_or(c.d_squared);
        c.theta = self.theta.clone().unwrap_or(c.theta);
        c.sigma_low = self.sigma_low.unwrap_or(c.sigma_low);
        c.sigma_high = self.sigma_high.unwrap_or(c.sigma_high);
        c.seed = self.seed.unwrap_or(c.seed);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpInstance {
    /// p×T
    pub x: Matrix,
    pub y: Vec<f64>,
    /// T×r
    pub f_true: Matrix,
    /// p×r
    pub lambda_true: Matrix,
    /// p×r standard-normal draws behind the loadings.
    pub z: Matrix,
    pub sigma: Vec<f64>,
    pub theta_true: Vec<f64>,
    pub true_support: Vec<usize>,
}

/// Draws one instance from stream `stream_id` of the configured seed.
///
/// Draw order: factors (including `h` pre-sample periods, one more for DGP 3),
/// loading draws, noise scales, idiosyncratic errors, target errors.
pub fn generate(config: &DgpConfig, stream_id: u64) -> Result<DgpInstance> {
    config.validate()?;
    let DgpConfig { p, t, r, h, .. } = *config;
    let mut rng = SeededRng::new(config.seed, stream_id);
    let lead = h + usize::from(config.dgp == 3);
    let f_all = Matrix::from_vec(t + lead, r, rng.normal_vec((t + lead) * r))?;
    let z = Matrix::from_vec(p, r, rng.normal_vec(p * r))?;
    let sigma: Vec<f64> = (0..p)
        .map(|_| rng.uniform_range(config.sigma_low, config.sigma_high))
        .collect();
    let e = rng.normal_vec(p * t);
    let eps = rng.normal_vec(t);

    let root_p = (p as f64).sqrt();
    let col_scale: Vec<f64> = (0..r)
        .map(|k| config.d_squared[k].sqrt() * (p as f64).powf(config.alphas[k] / 2.0) / root_p)
        .collect();
    let mut lambda = Matrix::zeros(p, r);
    for j in 0..p {
        for k in 0..r {
            lambda[(j, k)] = z[(j, k)] * col_scale[k];
        }
    }
    let f_true = f_all.slice_rows(lead, lead + t);
    let mut x = lambda.matmul(&f_true.transpose())?;
    for j in 0..p {
        for (s, v) in x.row_mut(j).iter_mut().enumerate() {
            *v += sigma[j] * e[j * t + s];
        }
    }
    let y = (0..t)
        .map(|s| {
            let cur = f_all.row(lead + s - h);
            let mut v = eps[s] + crate::numerics::dot(&config.theta[..r], cur);
            if config.dgp == 3 {
                v += crate::numerics::dot(&config.theta[r..], f_all.row(lead + s - h - 1));
            }
            v
        })
        .collect();
    let true_support = config
        .theta
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect();
    Ok(DgpInstance {
        x,
        y,
        f_true,
        lambda_true: lambda,
        z,
        sigma,
        theta_true: config.theta.clone(),
        true_support,
    })
}

/// Maps estimated factors into the frame of the loading matrix: row `t` of the
/// result is `V f̂_t`, with `V` the right singular matrix of `lambda`.
pub fn rotation_align(f_hat: &Matrix, lambda: &Matrix) -> Result<Matrix> {
    if f_hat.cols() != lambda.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimated factors against {} loading columns",
            f_hat.cols(),
            lambda.cols()
        )));
    }
    let v = svd(lambda)?.v;
    f_hat.matmul(&v.transpose())
}

/// Spectral norm of `(F̂F̂ᵀ − FFᵀ) / T`, computed from the `2r×2r` matrix `R J Rᵀ`
/// where `[F̂ F] = QR` and `J = diag(I, −I)`.
pub fn projector_gap(f_hat: &Matrix, f_true: &Matrix) -> Result<f64> {
    if f_hat.rows() != f_true.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimated periods against {} true periods",
            f_hat.rows(),
            f_true.rows()
        )));
    }
    let t = f_hat.rows() as f64;
    let a = f_hat.hstack(f_true)?;
    let r = thin_r(&a);
    let n = a.cols();
    let split = f_hat.cols();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = (0..n)
                .map(|k| if k < split { r[(i, k)] * r[(j, k)] } else { -r[(i, k)] * r[(j, k)] })
                .sum();
            m[(i, j)] = v / t;
            m[(j, i)] = v / t;
        }
    }
    Ok(sym_eigen(&m)?.eigenvalues.iter().fold(0.0f64, |acc, l| acc.max(l.abs())))
}

/// Upper-triangular factor of a thin QR by modified Gram–Schmidt with one
/// reorthogonalization pass. Rows for numerically dependent columns are zeroed.
fn thin_r(a: &Matrix) -> Matrix {
    let n = a.cols();
    let scale = (0..n).map(|j| dot(&a.column(j), &a.column(j))).fold(0.0f64, f64::max).sqrt();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r = Matrix::zeros(n, n);
    for j in 0..n {
        let mut v = a.column(j);
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &v);
                r[(i, j)] += c;
                v.iter_mut().zip(qi).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-13 * scale {
            r[(j, j)] = norm;
            q.push(v.iter().map(|x| x / norm).collect());
        } else {
            q.push(vec![0.0; v.len()]);
        }
    }
    r
}

/// Each column shifted and scaled to zero mean and unit (population) variance,
/// the convention applied to every observed series.
pub fn standardize_columns(m: &Matrix) -> Result<Matrix> {
    let cols = (0..m.cols())
        .map(|k| standardize(&m.column(k)))
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_columns(&cols)
}

/// Exact support match and the normalized projector gap.
pub fn recovery_metrics(
    f_hat: &Matrix,
    f_true: &Matrix,
    fitted_support: &[usize],
    true_support: &[usize],
) -> Result<(bool, f64)> {
    let norm = projector_gap(f_hat, f_true)?;
    Ok((same_support(fitted_support, true_support), norm))
}

fn same_support(a: &[usize], b: &[usize]) -> bool {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    a == b
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: u64,
    pub support_recovered: Option<bool>,
    pub fitted_support: Option<Vec<usize>>,
    pub factor_norm: Option<f64>,
    pub msfe: Option<f64>,
}

/// True loadings expressed in the coordinates of a scaled panel: row `i` is
/// `c_i λ_j / sd_j` for source predictor `j`, where `sd_j` is its standardization
/// scale and `c_i` its scaling coefficient (the first-lag coefficient on the
/// dynamic path, 1 when unscaled).
pub fn scaled_true_loadings(panel: &ScaledPanel, lambda: &Matrix, kept_rows: &[usize], sds: &[f64]) -> Matrix {
    let mut out = Matrix::zeros(panel.panel.rows(), lambda.cols());
    for (i, &src) in panel.source_indices.iter().enumerate() {
        let j = kept_rows[src];
        let c = match &panel.slopes[i] {
            SlopeRecord::Static { slope } => *slope,
            SlopeRecord::Dynamic { gammas, .. } => gammas[0],
        };
        for k in 0..lambda.cols() {
            out[(i, k)] = c * lambda[(j, k)] / sds[j];
        }
    }
    out
}

/// Orthogonal `R` minimizing `‖Λ̂R − Λ_s‖_F`, so that `F̂R` lives in the frame of
/// `lambda_scaled`.
pub fn procrustes_rotation(loadings_hat: &Matrix, lambda_scaled: &Matrix) -> Result<Matrix> {
    let cross = loadings_hat.transpose().matmul(lambda_scaled)?;
    let d = svd(&cross)?;
    d.u.matmul(&d.v.transpose())
}

/// Full-sample factor recovery on one instance, using the true factor count.
///
/// Factors come from the first panel of the configured variant and are rotated
/// into the true frame by the Procrustes fit of their loadings to the scaled true
/// loadings. A penalized regression (configured regressor and penalty rule) is then
/// fit on them; DGP 3 adds the first lag of each factor. The norm compares against
/// the true factors standardized over the same periods.
pub fn recover_factors(inst: &DgpInstance, dgp: &DgpConfig, pipeline: &PipelineConfig) -> Result<(Vec<usize>, f64)> {
    if pipeline.variant == Variant::Raw {
        return Err(Error::ConfigInvalid("factor recovery needs a factor variant".into()));
    }
    let cfg = pipeline.clone().with_factors(FactorCount::Fixed(dgp.r)).with_horizon(dgp.h);
    let win = standardize_window(&inst.x, &inst.y)?;
    let panels = variant_panels(&win.x, &win.y, &cfg)?;
    let model = extract_factors(&panels[0], dgp.r)?;
    let offset = model.time_offset;
    let sds: Vec<f64> = (0..inst.x.rows()).map(|j| variance(inst.x.row(j)).sqrt()).collect();
    let lambda_scaled = scaled_true_loadings(&panels[0], &inst.lambda_true, &win.kept_rows, &sds);
    let rotated = model.factors.matmul(&procrustes_rotation(&model.loadings, &lambda_scaled)?)?;
    let (design, target) = if dgp.dgp == 3 {
        let n = rotated.rows();
        let cur = rotated.slice_rows(1, n);
        let lag = rotated.slice_rows(0, n - 1);
        (cur.hstack(&lag)?, &win.y[offset + 1..])
    } else {
        (rotated, &win.y[offset..])
    };
    let fit = fit_regressor(&design, target, &cfg)?;
    let truth = standardize_columns(&inst.f_true.slice_rows(offset, inst.f_true.rows()))?;
    let norm = projector_gap(&model.factors, &truth)?;
    Ok((fit.support(), norm))
}

/// What each replication computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McOptions {
    pub recovery: bool,
    /// Penalty rule for the support-recovery regression.
    pub recovery_rule: PsiRule,
    /// Expanding-window origins `(first, last)`; `None` skips forecasting.
    pub origins: Option<(usize, usize)>,
}

impl McOptions {
    /// Recovery (one-standard-error penalty) plus forecasts over origins `⌊0.8T⌋ ..= T−h`.
    pub fn standard(dgp: &DgpConfig) -> Self {
        Self {
            recovery: true,
            recovery_rule: PsiRule::OneSe,
            origins: Some(default_origins(dgp)),
        }
    }

    pub fn recovery_only() -> Self {
        Self {
            recovery: true,
            recovery_rule: PsiRule::OneSe,
            origins: None,
        }
    }

    pub fn forecast_only(origins: (usize, usize)) -> Self {
        Self {
            recovery: false,
            recovery_rule: PsiRule::OneSe,
            origins: Some(origins),
        }
    }
}

pub fn default_origins(dgp: &DgpConfig) -> (usize, usize) {
    ((dgp.t * 4) / 5, dgp.t - dgp.h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub recovery_rate: Option<f64>,
    pub mean_norm: Option<f64>,
    pub mean_msfe: Option<f64>,
    pub replications: Vec<Replication>,
}

impl McReport {
    pub fn from_replications(replications: Vec<Replication>) -> Self {
        let avg = |vals: Vec<f64>| {
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        let recovery_rate = avg(replications
            .iter()
            .filter_map(|r| r.support_recovered.map(|b| if b { 1.0 } else { 0.0 }))
            .collect());
        let mean_norm = avg(replications.iter().filter_map(|r| r.factor_norm).collect());
        let mean_msfe = avg(replications.iter().filter_map(|r| r.msfe).collect());
        Self {
            recovery_rate,
            mean_norm,
            mean_msfe,
            replications,
        }
    }

    /// Per-replication factor norms.
    pub fn factor_norms(&self) -> Vec<f64> {
        self.replications.iter().filter_map(|r| r.factor_norm).collect()
    }
}

pub fn run_replication(dgp: &DgpConfig, pipeline: &PipelineConfig, index: u64, opts: McOptions) -> Result<Replication> {
    let inst = generate(dgp, index)?;
    let (fitted_support, support_recovered, factor_norm) = if opts.recovery {
        let (support, norm) = recover_factors(&inst, dgp, &pipeline.clone().with_psi_rule(opts.recovery_rule))?;
        let ok = same_support(&support, &inst.true_support);
        (Some(support), Some(ok), Some(norm))
    } else {
        (None, None, None)
    };
    let msfe = match opts.origins {
        Some((first, last)) => {
            let cfg = pipeline.clone().with_horizon(dgp.h);
            Some(expanding_window_eval(&inst.x, &inst.y, &cfg, first, last)?.msfe)
        }
        None => None,
    };
    Ok(Replication {
        index,
        support_recovered,
        fitted_support,
        factor_norm,
        msfe,
    })
}

/// Runs `n_reps` replications (stream id = replication index) and aggregates them.
pub fn monte_carlo(dgp: &DgpConfig, pipeline: &PipelineConfig, n_reps: usize, opts: McOptions) -> Result<McReport> {
    if n_reps == 0 {
        return Err(Error::ConfigInvalid("at least one replication is required".into()));
    }
    dgp.validate()?;
    pipeline.validate()?;
    let reps = (0..n_reps as u64)
        .into_par_iter()
        .map(|i| run_replication(dgp, pipeline, i, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(McReport::from_replications(reps))
}

fn default_true() -> bool {
    true
}

fn default_recovery_rule() -> PsiRule {
    PsiRule::OneSe
}

/// JSON experiment: a DGP, a pipeline, and the grids to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dgp: DgpSpec,
    pub pipeline: PipelineConfig,
    pub n_reps: usize,
    /// Defaults to the standard keep-fraction grid (`[1]` for PCA and SPCA).
    #[serde(default)]
    pub keep_fractions: Option<Vec<f64>>,
    /// Strength vectors to sweep; defaults to the DGP's own `alphas`.
    #[serde(default)]
    pub strength_configs: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_true")]
    pub recovery: bool,
    /// Penalty rule for support recovery; forecasting uses the pipeline's own rule.
    #[serde(default = "default_recovery_rule")]
    pub recovery_psi_rule: PsiRule,
    #[serde(default = "default_true")]
    pub forecast: bool,
    #[serde(default)]
    pub first_origin: Option<usize>,
    #[serde(default)]
    pub last_origin: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub keep_fraction: f64,
    pub strength_config: String,
    pub recovery_rate: Option<f64>,
    pub mean_norm: Option<f64>,
    pub mean_msfe: Option<f64>,
}

/// Formats a strength vector as `(1,0.5,1,1)`.
pub fn strength_label(alphas: &[f64]) -> String {
    let parts: Vec<String> = alphas.iter().map(|a| format!("{a}")).collect();
    format!("({})", parts.join(","))
}

/// Runs every (strength, keep-fraction) cell; rows are ordered by keep fraction,
/// then strength configuration.
pub fn run_experiment(spec: &ExperimentSpec, seed: Option<u64>) -> Result<Vec<ExperimentRow>> {
    let mut base = spec.dgp.resolve()?;
    if let Some(s) = seed {
        base.seed = s;
    }
    let fractions = match (&spec.keep_fractions, spec.pipeline.variant) {
        (Some(v), _) => v.clone(),
        (None, Variant::Pca | Variant::Spca | Variant::Raw) => vec![1.0],
        (None, _) => KEEP_FRACTION_GRID.to_vec(),
    };
    if fractions.is_empty() {
        return Err(Error::ConfigInvalid("keep-fraction grid is empty".into()));
    }
    let strengths = spec.strength_configs.clone().unwrap_or_else(|| vec![base.alphas.clone()]);
    let opts = McOptions {
        recovery: spec.recovery && spec.pipeline.variant != Variant::Raw,
        recovery_rule: spec.recovery_psi_rule,
        origins: spec.forecast.then(|| {
            let (f, l) = default_origins(&base);
            (spec.first_origin.unwrap_or(f), spec.last_origin.unwrap_or(l))
        }),
    };
    let mut rows = Vec::new();
    for &kf in &fractions {
        for alphas in &strengths {
            let dgp = base.clone().with_alphas(alphas);
            let pipe = spec.pipeline.clone().with_keep_fraction(kf);
            let report = monte_carlo(&dgp, &pipe, spec.n_reps, opts)?;
            rows.push(ExperimentRow {
                keep_fraction: kf,
                strength_config: strength_label(alphas),
                recovery_rate: report.recovery_rate,
                mean_norm: report.mean_norm,
                mean_msfe: report.mean_msfe,
            });
        }
    }
    Ok(rows)
}
