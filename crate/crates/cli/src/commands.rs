use std::path::Path;

use log::info;
use serde::Serialize;
use ssrf_core::factors::{extract_factors_with, shares_from_spectrum, FactorModel};
use ssrf_core::pipeline::{
    build_factor_space, default_keep_grid, dynamic_panel, expanding_window_eval, resolve_factor_count,
    standardize_window, static_panel, tune_keep_fraction, ForecastRecord, PipelineConfig,
};
use ssrf_core::scaling::ScaledPanel;
use ssrf_core::simulation::{run_experiment, ExperimentSpec};
use ssrf_core::transform::{load_dataset, target_series, Dataset, YearMonth};
use ssrf_core::{Error, Matrix};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{config_hash, fmt_f64, fmt_opt, timestamp, OutputDir};

pub const TOP_SHARES: usize = 15;

/// Predictor panel and target taken from a dataset, with the split resolved.
struct Prepared {
    dataset: Dataset,
    x: Matrix,
    /// Dataset row of each `x` row.
    x_rows: Vec<usize>,
    y: Vec<f64>,
    /// Observations in the training sample.
    n_train: usize,
}

fn prepare(data: &Path, spec: &Path, cfg: &RunConfig) -> CliResult<Prepared> {
    let dataset = load_dataset(data, spec)?;
    for w in &dataset.warnings {
        log::warn!("{w}");
    }
    let y = target_series(&dataset, &cfg.target)?;
    let target_row = dataset.index_of(&cfg.target).expect("target exists");
    let x_rows: Vec<usize> = (0..dataset.n_series())
        .filter(|&i| !(cfg.exclude_target && i == target_row))
        .collect();
    if x_rows.is_empty() {
        return Err(Error::InsufficientData("no predictors besides the target".into()).into());
    }
    let x = dataset.panel.select_rows(&x_rows);
    let last = *dataset.dates.last().expect("non-empty dataset");
    if cfg.split_date >= last {
        return Err(Error::InsufficientData(format!(
            "split date {} leaves no test period (last observation {last})",
            cfg.split_date
        ))
        .into());
    }
    let n_train = dataset
        .period_index(cfg.split_date)
        .map(|i| i + 1)
        .ok_or_else(|| Error::InsufficientData(format!("split date {} precedes the sample", cfg.split_date)))?;
    Ok(Prepared {
        dataset,
        x,
        x_rows,
        y,
        n_train,
    })
}

#[derive(Serialize)]
struct SimulateResolved<'a> {
    spec: &'a ExperimentSpec,
    seed: u64,
}

pub fn simulate(spec_path: &Path, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let started = timestamp();
    let text = std::fs::read_to_string(spec_path).map_err(|e| CliError::io(spec_path, e))?;
    let spec: ExperimentSpec = serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: spec_path.to_path_buf(),
        source,
    })?;
    let seed = seed.or(spec.dgp.seed).unwrap_or(42);
    spec.pipeline.validate()?;
    spec.dgp.resolve()?;
    info!("running {} replications per cell", spec.n_reps);
    let rows = run_experiment(&spec, Some(seed))?;

    let mut dir = OutputDir::create(out)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.keep_fraction),
                r.strength_config.clone(),
                fmt_opt(r.recovery_rate),
                fmt_opt(r.mean_norm),
                fmt_opt(r.mean_msfe),
            ]
        })
        .collect();
    dir.write_csv(
        "simulation.csv",
        &["keep_fraction", "strength_config", "recovery_rate", "mean_norm", "mean_msfe"],
        &table,
    )?;
    let hash = config_hash(&SimulateResolved { spec: &spec, seed })?;
    dir.finish("simulate", hash, seed, started)
}

#[derive(Serialize)]
struct ForecastSummary<'a> {
    target: &'a str,
    msfe: f64,
    n_forecasts: usize,
    first_origin: YearMonth,
    last_origin: YearMonth,
    config: &'a PipelineConfig,
}

fn record_row(r: &ForecastRecord, dates: &[YearMonth]) -> Vec<String> {
    let target_idx = r.origin_time - 1 + r.horizon;
    let counts: Vec<String> = r.factor_counts.iter().map(|c| c.to_string()).collect();
    vec![
        r.origin_time.to_string(),
        dates[r.origin_time - 1].to_string(),
        dates[target_idx].to_string(),
        r.horizon.to_string(),
        fmt_f64(r.prediction),
        fmt_opt(r.actual),
        fmt_opt(r.actual.map(|a| a - r.prediction)),
        r.active_factors.to_string(),
        counts.join(";"),
        fmt_f64(r.penalty),
    ]
}

pub fn forecast(data: &Path, spec: &Path, config: &Path, seed: u64, out: &Path) -> CliResult<()> {
    let started = timestamp();
    let cfg = RunConfig::load(config)?;
    let prep = prepare(data, spec, &cfg)?;
    let h = cfg.pipeline.h;
    let t = prep.y.len();
    if prep.n_train + h > t {
        return Err(Error::InsufficientData(format!(
            "split leaves {} test periods for horizon {h}",
            t - prep.n_train
        ))
        .into());
    }
    let (first, last) = (prep.n_train, t - h);
    info!("forecasting origins {first}..={last}");
    let report = expanding_window_eval(&prep.x, &prep.y, &cfg.pipeline, first, last)?;
    let dates = &prep.dataset.dates;

    let mut dir = OutputDir::create(out)?;
    let rows: Vec<Vec<String>> = report.records.iter().map(|r| record_row(r, dates)).collect();
    dir.write_csv(
        "forecasts.csv",
        &[
            "origin_time",
            "origin_date",
            "target_date",
            "horizon",
            "prediction",
            "actual",
            "error",
            "active_factors",
            "factor_counts",
            "penalty",
        ],
        &rows,
    )?;
    dir.write_json(
        "summary.json",
        &ForecastSummary {
            target: &cfg.target,
            msfe: report.msfe,
            n_forecasts: report.records.len(),
            first_origin: dates[first - 1],
            last_origin: dates[last - 1],
            config: &cfg.pipeline,
        },
    )?;
    if cfg.emit_eigen_shares {
        let mut share_rows = Vec::new();
        for origin in first..=last {
            let win = standardize_window(&prep.x.slice_cols(0, origin), &prep.y[..origin])?;
            let space = build_factor_space(&win.x, &win.y, &cfg.pipeline)?;
            for (c, comp) in space.components.iter().enumerate() {
                for (i, s) in shares_from_spectrum(&comp.model.eigenvalues, TOP_SHARES).iter().enumerate() {
                    share_rows.push(vec![
                        origin.to_string(),
                        dates[origin - 1].to_string(),
                        c.to_string(),
                        (i + 1).to_string(),
                        fmt_f64(*s),
                    ]);
                }
            }
        }
        dir.write_csv(
            "eigen_shares.csv",
            &["origin_time", "origin_date", "space", "component", "share"],
            &share_rows,
        )?;
    }
    dir.finish("forecast", config_hash(&cfg)?, seed, started)
}

#[derive(Serialize)]
struct TuneOutput {
    best_fraction: f64,
    n_train: usize,
    split_date: YearMonth,
}

pub fn tune(data: &Path, spec: &Path, config: &Path, seed: u64, out: &Path) -> CliResult<()> {
    let started = timestamp();
    let mut cfg = RunConfig::load(config)?;
    let prep = prepare(data, spec, &cfg)?;
    let grid = cfg.tune_grid.clone().unwrap_or_else(default_keep_grid);
    cfg.tune_grid = Some(grid.clone());
    let n = prep.n_train;
    let result = tune_keep_fraction(&prep.x.slice_cols(0, n), &prep.y[..n], &cfg.pipeline, &grid)?;

    let mut dir = OutputDir::create(out)?;
    let rows: Vec<Vec<String>> = result
        .cv_table
        .iter()
        .map(|(kf, e)| vec![fmt_f64(*kf), fmt_f64(*e)])
        .collect();
    dir.write_csv("cv_table.csv", &["keep_fraction", "cv_msfe"], &rows)?;
    dir.write_json(
        "tune.json",
        &TuneOutput {
            best_fraction: result.best_fraction,
            n_train: n,
            split_date: cfg.split_date,
        },
    )?;
    dir.finish("tune", config_hash(&cfg)?, seed, started)
}

pub const REPORT_METHODS: [&str; 5] = ["PCA", "sPCA", "srPCA", "SSPCA-f", "SSPCA-d"];

fn report_panel(method: &str, x: &Matrix, y: &[f64], cfg: &PipelineConfig) -> ssrf_core::Result<ScaledPanel> {
    let (h, kf) = (cfg.h, cfg.keep_fraction);
    match method {
        "PCA" => static_panel(x, y, h, 1.0, false),
        "sPCA" => static_panel(x, y, h, 1.0, true),
        "srPCA" => static_panel(x, y, h, kf, false),
        "SSPCA-f" => static_panel(x, y, h, kf, true),
        _ => dynamic_panel(x, y, h, kf, &cfg.candidate_lags),
    }
}

pub fn eigen_report(data: &Path, spec: &Path, config: &Path, seed: u64, out: &Path) -> CliResult<()> {
    let started = timestamp();
    let cfg = RunConfig::load(config)?;
    let prep = prepare(data, spec, &cfg)?;
    let n = prep.n_train;
    let win = standardize_window(&prep.x.slice_cols(0, n), &prep.y[..n])?;

    let mut fits: Vec<(ScaledPanel, FactorModel)> = Vec::with_capacity(REPORT_METHODS.len());
    for method in REPORT_METHODS {
        let panel = report_panel(method, &win.x, &win.y, &cfg.pipeline)?;
        let model = extract_factors_with(&panel, |e| resolve_factor_count(&panel, e, cfg.pipeline.r))?;
        fits.push((panel, model));
    }

    let shares: Vec<Vec<f64>> = fits
        .iter()
        .map(|(_, m)| {
            let mut s = shares_from_spectrum(&m.eigenvalues, TOP_SHARES);
            s.resize(TOP_SHARES, 0.0);
            s
        })
        .collect();
    let share_rows: Vec<Vec<String>> = (0..TOP_SHARES)
        .map(|i| {
            let mut row = vec![(i + 1).to_string()];
            row.extend(shares.iter().map(|s| fmt_f64(s[i])));
            row
        })
        .collect();
    let mut header = vec!["component"];
    header.extend(REPORT_METHODS);

    let width = fits.iter().map(|(_, m)| m.n_factors()).max().unwrap_or(0);
    let mut load_rows = Vec::new();
    for (method, (panel, model)) in REPORT_METHODS.iter().zip(&fits) {
        for (i, &src) in panel.source_indices.iter().enumerate() {
            let spec = &prep.dataset.specs[prep.x_rows[win.kept_rows[src]]];
            let mut row = vec![method.to_string(), spec.name.clone(), spec.group.code().to_string()];
            for f in 0..width {
                row.push(if f < model.n_factors() {
                    fmt_f64(model.loadings[(i, f)])
                } else {
                    String::new()
                });
            }
            load_rows.push(row);
        }
    }
    let factor_cols: Vec<String> = (1..=width).map(|f| format!("factor_{f}")).collect();
    let mut load_header = vec!["method", "variable", "group"];
    load_header.extend(factor_cols.iter().map(String::as_str));

    let mut dir = OutputDir::create(out)?;
    dir.write_csv("eigen_shares.csv", &header, &share_rows)?;
    dir.write_csv("loadings.csv", &load_header, &load_rows)?;
    dir.finish("eigen-report", config_hash(&cfg)?, seed, started)
}
