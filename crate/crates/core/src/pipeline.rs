//! End-to-end assembly: factor spaces, point forecasts, expanding-window
//! evaluation and keep-fraction tuning.

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::factors::{estimate_num_factors, extract_factors_with, numerical_rank, FactorModel, DEFAULT_FACTORS};
use crate::numerics::{moments, Matrix};
use crate::scaling::{dynamic_scale, static_scale, ScaledPanel};
use crate::screening::{dynamic_screen, static_screen, DEFAULT_LAGS, KEEP_FRACTION_GRID};
use crate::shrinkage::{
    cv_penalty, cv_penalty_wide, default_psi_grid, enet_fit, lasso_fit, ShrinkageFit, DEFAULT_PSI_GRID_LEN,
};

/// Which predictors feed the regression, and how they are prepared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Static screening + slope scaling + PCA.
    #[serde(rename = "SSRF1")]
    Ssrf1,
    /// Dynamic screening + lag-polynomial scaling + PCA.
    #[serde(rename = "SSRF2")]
    Ssrf2,
    /// Columns of both factor spaces side by side.
    #[serde(rename = "SSRF3")]
    Ssrf3,
    /// Plain PCA on all predictors.
    #[serde(rename = "PCA")]
    Pca,
    /// Slope scaling without screening.
    #[serde(rename = "SPCA")]
    Spca,
    /// Screening without scaling.
    #[serde(rename = "SRPCA")]
    Srpca,
    /// No factors: the regression runs on the standardized predictors themselves.
    #[serde(rename = "RAW")]
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regressor {
    #[serde(rename = "OLS")]
    Ols,
    #[serde(rename = "LASSO")]
    Lasso,
    #[serde(rename = "ENET")]
    Enet,
}

/// A count that may be left to the ratio estimator (`"AUTO"` in JSON).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorCount {
    Fixed(usize),
    Auto,
}

impl Serialize for FactorCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FactorCount::Fixed(n) => s.serialize_u64(*n as u64),
            FactorCount::Auto => s.serialize_str("AUTO"),
        }
    }
}

impl<'de> Deserialize<'de> for FactorCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(FactorCount::Fixed(n)),
            Raw::S(s) if s.eq_ignore_ascii_case("auto") => Ok(FactorCount::Auto),
            Raw::S(s) => Err(serde::de::Error::custom(format!("expected a count or \"AUTO\", got `{s}`"))),
        }
    }
}

/// How the cross-validated penalty is read off the CV curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum PsiRule {
    /// Smallest mean validation error.
    #[serde(rename = "MIN")]
    #[default]
    Min,
    /// Largest penalty within one standard error of the minimum.
    #[serde(rename = "ONE_SE")]
    OneSe,
}

/// Penalty grid, or `"AUTO"` for the log-spaced grid below the null threshold.
#[derive(Debug, Clone, PartialEq)]
pub enum PsiGrid {
    Auto,
    Values(Vec<f64>),
}

impl Serialize for PsiGrid {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PsiGrid::Auto => s.serialize_str("AUTO"),
            PsiGrid::Values(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for PsiGrid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            V(Vec<f64>),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::V(v) => Ok(PsiGrid::Values(v)),
            Raw::S(s) if s.eq_ignore_ascii_case("auto") => Ok(PsiGrid::Auto),
            Raw::S(s) => Err(serde::de::Error::custom(format!("expected a list or \"AUTO\", got `{s}`"))),
        }
    }
}

fn default_h() -> usize {
    1
}
fn default_keep() -> f64 {
    1.0
}
fn default_r() -> FactorCount {
    FactorCount::Fixed(DEFAULT_FACTORS)
}
fn default_lags() -> Vec<usize> {
    DEFAULT_LAGS.to_vec()
}
fn default_psi() -> PsiGrid {
    PsiGrid::Auto
}
fn default_alpha() -> f64 {
    0.5
}
fn default_cv_window() -> usize {
    20
}
fn default_tune_window() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub variant: Variant,
    pub regressor: Regressor,
    #[serde(default = "default_h")]
    pub h: usize,
    #[serde(default = "default_keep")]
    pub keep_fraction: f64,
    #[serde(default = "default_r")]
    pub r: FactorCount,
    #[serde(default = "default_lags")]
    pub candidate_lags: Vec<usize>,
    #[serde(default = "default_psi")]
    pub psi_grid: PsiGrid,
    #[serde(default)]
    pub psi_rule: PsiRule,
    /// L1 share of the elastic-net penalty (ENET only).
    #[serde(default = "default_alpha")]
    pub alpha_mix: f64,
    /// Validation origins used for penalty cross-validation.
    #[serde(default = "default_cv_window")]
    pub cv_window: usize,
    /// Validation origins used for keep-fraction tuning.
    #[serde(default = "default_tune_window")]
    pub tune_window: usize,
}

impl PipelineConfig {
    pub fn new(variant: Variant, regressor: Regressor) -> Self {
        let keep = match variant {
            Variant::Ssrf1 | Variant::Ssrf2 | Variant::Ssrf3 | Variant::Srpca => 0.5,
            _ => 1.0,
        };
        Self {
            variant,
            regressor,
            h: default_h(),
            keep_fraction: keep,
            r: default_r(),
            candidate_lags: default_lags(),
            psi_grid: default_psi(),
            psi_rule: PsiRule::default(),
            alpha_mix: default_alpha(),
            cv_window: default_cv_window(),
            tune_window: default_tune_window(),
        }
    }

    pub fn with_keep_fraction(mut self, kf: f64) -> Self {
        self.keep_fraction = kf;
        self
    }

    pub fn with_factors(mut self, r: FactorCount) -> Self {
        self.r = r;
        self
    }

    pub fn with_psi_rule(mut self, rule: PsiRule) -> Self {
        self.psi_rule = rule;
        self
    }

    pub fn with_horizon(mut self, h: usize) -> Self {
        self.h = h;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return Err(Error::ConfigInvalid("horizon must be at least 1".into()));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "keep_fraction {} outside (0, 1]",
                self.keep_fraction
            )));
        }
        if matches!(self.variant, Variant::Pca | Variant::Spca) && self.keep_fraction != 1.0 {
            return Err(Error::ConfigInvalid(format!(
                "{:?} uses every predictor; keep_fraction must be 1",
                self.variant
            )));
        }
        if self.r == FactorCount::Fixed(0) {
            return Err(Error::ConfigInvalid("factor count must be positive".into()));
        }
        if self.candidate_lags.is_empty() || self.candidate_lags.contains(&0) {
            return Err(Error::ConfigInvalid("candidate lags must be positive and non-empty".into()));
        }
        if let PsiGrid::Values(v) = &self.psi_grid {
            if v.is_empty() || v.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
                return Err(Error::ConfigInvalid("penalty grid must be non-empty and non-negative".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha_mix) {
            return Err(Error::ConfigInvalid(format!("alpha_mix {} outside [0, 1]", self.alpha_mix)));
        }
        if self.cv_window == 0 || self.tune_window == 0 {
            return Err(Error::ConfigInvalid("validation windows must be positive".into()));
        }
        if self.variant == Variant::Raw && self.regressor == Regressor::Ols {
            return Err(Error::ConfigInvalid("OLS on raw predictors is not identified".into()));
        }
        Ok(())
    }
}

/// One factor space together with the scaled panel it came from.
#[derive(Debug, Clone)]
pub struct SpaceComponent {
    pub panel: ScaledPanel,
    pub model: FactorModel,
}

/// Regression design produced by a pipeline variant.
#[derive(Debug, Clone)]
pub struct FactorSpace {
    /// T_eff×(Σ r), rows aligned with original times `time_offset..T`.
    pub factors: Matrix,
    pub time_offset: usize,
    /// Factor count of each component space.
    pub factor_counts: Vec<usize>,
    pub components: Vec<SpaceComponent>,
}

/// Screened and scaled panel for the static family (PCA, SPCA, SRPCA, SSRF1).
pub fn static_panel(x: &Matrix, y: &[f64], h: usize, keep_fraction: f64, scale: bool) -> Result<ScaledPanel> {
    let screen = static_screen(x, y, h, keep_fraction)?;
    let x_sel = x.select_rows(&screen.selected);
    let panel = if scale {
        static_scale(&x_sel, y, h)?
    } else {
        ScaledPanel::unscaled(x_sel, (0..screen.selected.len()).collect())
    };
    Ok(panel.with_source_indices(screen.selected))
}

/// Dynamically screened and scaled panel (SSRF2).
pub fn dynamic_panel(x: &Matrix, y: &[f64], h: usize, keep_fraction: f64, lags: &[usize]) -> Result<ScaledPanel> {
    let screen = dynamic_screen(x, y, h, keep_fraction, lags)?;
    let x_sel = x.select_rows(&screen.selected);
    let orders = screen.lags.clone().unwrap_or_default();
    Ok(dynamic_scale(&x_sel, y, h, &orders)?.with_source_indices(screen.selected))
}

/// The scaled panels a variant draws factors from.
pub fn variant_panels(x: &Matrix, y: &[f64], config: &PipelineConfig) -> Result<Vec<ScaledPanel>> {
    let h = config.h;
    let kf = config.keep_fraction;
    Ok(match config.variant {
        Variant::Pca => vec![static_panel(x, y, h, 1.0, false)?],
        Variant::Spca => vec![static_panel(x, y, h, 1.0, true)?],
        Variant::Srpca => vec![static_panel(x, y, h, kf, false)?],
        Variant::Ssrf1 => vec![static_panel(x, y, h, kf, true)?],
        Variant::Ssrf2 => vec![dynamic_panel(x, y, h, kf, &config.candidate_lags)?],
        Variant::Ssrf3 => vec![
            static_panel(x, y, h, kf, true)?,
            dynamic_panel(x, y, h, kf, &config.candidate_lags)?,
        ],
        Variant::Raw => {
            return Err(Error::ConfigInvalid("raw-predictor variant has no factor panel".into()));
        }
    })
}

/// Factor count for one panel: fixed counts are capped at the numerical rank,
/// `AUTO` uses the ratio estimator with `R = ⌊min(k, T_eff)/2⌋`.
pub fn resolve_factor_count(panel: &ScaledPanel, eigenvalues: &[f64], r: FactorCount) -> Result<usize> {
    let rank = numerical_rank(eigenvalues);
    if rank == 0 {
        return Err(Error::InsufficientData("scaled panel is identically zero".into()));
    }
    match r {
        FactorCount::Fixed(n) => Ok(n.min(rank)),
        FactorCount::Auto => {
            let dim = panel.panel.rows().min(panel.panel.cols());
            estimate_num_factors(eigenvalues, (dim / 2).max(1))
        }
    }
}

/// Builds the regression design for `config` from standardized `x` (p×T) and `y`.
pub fn build_factor_space(x: &Matrix, y: &[f64], config: &PipelineConfig) -> Result<FactorSpace> {
    config.validate()?;
    if config.variant == Variant::Raw {
        return Ok(FactorSpace {
            factors: x.transpose(),
            time_offset: 0,
            factor_counts: vec![x.rows()],
            components: Vec::new(),
        });
    }
    let mut components = Vec::new();
    for panel in variant_panels(x, y, config)? {
        let model = extract_factors_with(&panel, |eigs| resolve_factor_count(&panel, eigs, config.r))?;
        components.push(SpaceComponent { panel, model });
    }
    let time_offset = components.iter().map(|c| c.model.time_offset).max().unwrap_or(0);
    let t = y.len();
    let mut factors: Option<Matrix> = None;
    for c in &components {
        let skip = time_offset - c.model.time_offset;
        let part = c.model.factors.slice_rows(skip, c.model.factors.rows());
        factors = Some(match factors {
            None => part,
            Some(acc) => acc.hstack(&part)?,
        });
    }
    let factors = factors.expect("at least one component");
    debug_assert_eq!(factors.rows(), t - time_offset);
    Ok(FactorSpace {
        factors,
        time_offset,
        factor_counts: components.iter().map(|c| c.model.n_factors()).collect(),
        components,
    })
}

/// Standardizes predictor rows and the target over a window.
///
/// Rows constant within the window are dropped; the kept row indices are returned.
#[derive(Debug, Clone)]
pub struct StandardizedWindow {
    pub x: Matrix,
    pub kept_rows: Vec<usize>,
    pub y: Vec<f64>,
    pub y_mean: f64,
    pub y_sd: f64,
}

pub fn standardize_window(x: &Matrix, y: &[f64]) -> Result<StandardizedWindow> {
    if x.cols() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "panel has {} periods, target has {}",
            x.cols(),
            y.len()
        )));
    }
    let (y_mean, y_sd) = moments(y)?;
    let mut rows = Vec::with_capacity(x.rows());
    let mut kept_rows = Vec::with_capacity(x.rows());
    for j in 0..x.rows() {
        match moments(x.row(j)) {
            Ok((m, sd)) => {
                rows.push(x.row(j).iter().map(|v| (v - m) / sd).collect::<Vec<f64>>());
                kept_rows.push(j);
            }
            Err(Error::ConstantSeries { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("every predictor is constant in the window".into()));
    }
    Ok(StandardizedWindow {
        x: Matrix::from_rows(&rows)?,
        kept_rows,
        y: y.iter().map(|v| (v - y_mean) / y_sd).collect(),
        y_mean,
        y_sd,
    })
}

/// Fits the configured regressor on a factor design (rows aligned with `y`).
pub fn fit_regressor(f: &Matrix, y: &[f64], config: &PipelineConfig) -> Result<ShrinkageFit> {
    let h = config.h;
    let rows = f.rows();
    let (alpha, wide) = match config.regressor {
        Regressor::Ols => return lasso_fit(f, y, h, 0.0),
        Regressor::Lasso => (1.0, config.variant == Variant::Raw),
        Regressor::Enet => (config.alpha_mix, config.variant == Variant::Raw),
    };
    let grid = match &config.psi_grid {
        PsiGrid::Auto => default_psi_grid(f, y, h, alpha, DEFAULT_PSI_GRID_LEN)?,
        PsiGrid::Values(v) => {
            let mut v = v.clone();
            v.sort_by(|a, b| b.total_cmp(a));
            v
        }
    };
    if rows <= h + 2 {
        return Err(Error::InsufficientData(format!("{rows} rows at horizon {h}")));
    }
    let last_origin = rows - h;
    let window_start = (last_origin + 1).saturating_sub(config.cv_window);
    let cv = if wide {
        cv_penalty_wide(f, y, h, &grid, window_start.max(h + 2), alpha)?
    } else {
        let floor = f.cols() + 5;
        if floor > last_origin {
            return Err(Error::InsufficientData(format!(
                "{rows} rows cannot cross-validate {} factors",
                f.cols()
            )));
        }
        cv_penalty(f, y, h, &grid, window_start.max(floor), alpha)?
    };
    let psi = match config.psi_rule {
        PsiRule::Min => cv.best_psi,
        PsiRule::OneSe => cv.one_se_psi,
    };
    debug!("cv picked psi = {psi}");
    enet_fit(f, y, h, psi, alpha)
}

/// One point forecast from an expanding-window origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    /// Number of observations used (the 1-based index of the last one).
    pub origin_time: usize,
    pub horizon: usize,
    pub prediction: f64,
    /// Realized value, when known.
    pub actual: Option<f64>,
    pub active_factors: usize,
    /// Factor count of each component space.
    pub factor_counts: Vec<usize>,
    pub penalty: f64,
    pub config_snapshot: PipelineConfig,
}

/// Refits the whole pipeline on a training window and forecasts `h` steps past its end.
///
/// The prediction is returned in the units of `y_train`.
pub fn forecast_one(x_train: &Matrix, y_train: &[f64], config: &PipelineConfig) -> Result<ForecastRecord> {
    config.validate()?;
    let t = y_train.len();
    if t < config.h + 4 {
        return Err(Error::InsufficientData(format!(
            "{t} observations are too few for horizon {}",
            config.h
        )));
    }
    let win = standardize_window(x_train, y_train)?;
    let space = build_factor_space(&win.x, &win.y, config)?;
    let y_aligned = &win.y[space.time_offset..];
    let fit = fit_regressor(&space.factors, y_aligned, config)?;
    let last = space.factors.row(space.factors.rows() - 1);
    let prediction = win.y_mean + win.y_sd * fit.predict(last);
    let mut snapshot = config.clone();
    if space.factor_counts.len() == 1 && config.variant != Variant::Raw {
        snapshot.r = FactorCount::Fixed(space.factor_counts[0]);
    }
    Ok(ForecastRecord {
        origin_time: t,
        horizon: config.h,
        prediction,
        actual: None,
        active_factors: fit.active_set.len(),
        factor_counts: space.factor_counts,
        penalty: fit.penalty,
        config_snapshot: snapshot,
    })
}

/// Root mean squared forecast error over records with a known outcome.
pub fn msfe(records: &[ForecastRecord]) -> f64 {
    let errs: Vec<f64> = records
        .iter()
        .filter_map(|r| r.actual.map(|a| (a - r.prediction).powi(2)))
        .collect();
    if errs.is_empty() {
        return f64::NAN;
    }
    (errs.iter().sum::<f64>() / errs.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub msfe: f64,
    pub records: Vec<ForecastRecord>,
}

/// Expanding-window out-of-sample evaluation over origins `first..=last`
/// (each origin counts the observations available).
pub fn expanding_window_eval(
    x: &Matrix,
    y: &[f64],
    config: &PipelineConfig,
    first_origin: usize,
    last_origin: usize,
) -> Result<EvaluationReport> {
    config.validate()?;
    if x.cols() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "panel has {} periods, target has {}",
            x.cols(),
            y.len()
        )));
    }
    let t = y.len();
    if last_origin + config.h > t {
        return Err(Error::InsufficientData(format!(
            "origin {last_origin} plus horizon {} runs past {t} observations",
            config.h
        )));
    }
    if first_origin > last_origin || first_origin < config.h + 4 {
        return Err(Error::InsufficientData(format!(
            "empty or too early origin range {first_origin}..={last_origin}"
        )));
    }
    let records: Vec<ForecastRecord> = (first_origin..=last_origin)
        .into_par_iter()
        .map(|origin| {
            let mut rec = forecast_one(&x.slice_cols(0, origin), &y[..origin], config)?;
            rec.actual = Some(y[origin - 1 + config.h]);
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        msfe: msfe(&records),
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_fraction: f64,
    /// `(fraction, validation MSFE)` in grid order.
    pub cv_table: Vec<(f64, f64)>,
}

/// Picks the keep fraction with the smallest expanding-window MSFE over the last
/// `tune_window` origins of the training sample (ties to the larger fraction).
pub fn tune_keep_fraction(
    x_train: &Matrix,
    y_train: &[f64],
    config: &PipelineConfig,
    grid: &[f64],
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::ConfigInvalid("keep-fraction grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
        return Err(Error::ConfigInvalid(format!("keep fraction {bad} outside (0, 1]")));
    }
    let n = y_train.len();
    if n < config.h + config.tune_window + 4 {
        return Err(Error::InsufficientData(format!(
            "{n} observations cannot hold a {}-origin tuning window",
            config.tune_window
        )));
    }
    let last = n - config.h;
    let first = last + 1 - config.tune_window;
    let mut cv_table = Vec::with_capacity(grid.len());
    for &kf in grid {
        let cfg = config.clone().with_keep_fraction(kf);
        let report = expanding_window_eval(x_train, y_train, &cfg, first, last)?;
        cv_table.push((kf, report.msfe));
    }
    let mut best = cv_table[0];
    for &(kf, e) in &cv_table[1..] {
        if e < best.1 || (e == best.1 && kf > best.0) {
            best = (kf, e);
        }
    }
    Ok(TuneResult {
        best_fraction: best.0,
        cv_table,
    })
}

/// Default keep-fraction grid as a vector.
pub fn default_keep_grid() -> Vec<f64> {
    KEEP_FRACTION_GRID.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_round_trip_and_defaults() {
        let cfg: PipelineConfig = serde_json::from_str(
            r#"{"variant":"SSRF2","regressor":"LASSO","keep_fraction":0.2,"r":"AUTO","psi_grid":[1.0,0.1]}"#,
        )
        .unwrap();
        assert_eq!(cfg.variant, Variant::Ssrf2);
        assert_eq!(cfg.r, FactorCount::Auto);
        assert_eq!(cfg.h, 1);
        assert_eq!(cfg.candidate_lags, vec![1, 2]);
        assert_eq!(cfg.psi_grid, PsiGrid::Values(vec![1.0, 0.1]));
        let back: PipelineConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"variant":"SSRF9","regressor":"OLS"}"#).is_err());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"variant":"PCA","regressor":"OLS","bogus":1}"#).is_err());
    }

    #[test]
    fn validation_rules() {
        assert!(PipelineConfig::new(Variant::Pca, Regressor::Ols).validate().is_ok());
        assert!(PipelineConfig::new(Variant::Pca, Regressor::Ols)
            .with_keep_fraction(0.5)
            .validate()
            .is_err());
        assert!(PipelineConfig::new(Variant::Ssrf1, Regressor::Lasso)
            .with_keep_fraction(0.0)
            .validate()
            .is_err());
        assert!(PipelineConfig::new(Variant::Raw, Regressor::Ols).validate().is_err());
        assert!(PipelineConfig::new(Variant::Ssrf1, Regressor::Lasso)
            .with_horizon(0)
            .validate()
            .is_err());
    }

    #[test]
    fn msfe_of_perfect_and_zero_forecasts() {
        let cfg = PipelineConfig::new(Variant::Pca, Regressor::Ols);
        let rec = |p: f64, a: f64| ForecastRecord {
            origin_time: 1,
            horizon: 1,
            prediction: p,
            actual: Some(a),
            active_factors: 0,
            factor_counts: vec![1],
            penalty: 0.0,
            config_snapshot: cfg.clone(),
        };
        assert_eq!(msfe(&[rec(1.0, 1.0), rec(-2.0, -2.0)]), 0.0);
        let actual = [0.5, -1.5, 1.0, 2.0];
        let recs: Vec<_> = actual.iter().map(|a| rec(0.0, *a)).collect();
        let direct = (actual.iter().map(|a| a * a).sum::<f64>() / 4.0).sqrt();
        assert!((msfe(&recs) - direct).abs() < 1e-15);
        let mut rev = recs.clone();
        rev.reverse();
        assert_eq!(msfe(&rev), msfe(&recs));
    }
}
