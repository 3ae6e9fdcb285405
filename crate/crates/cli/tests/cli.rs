mod common;

use common::*;
use serde_json::{json, Value};
use tempfile::TempDir;

fn run_config(dir: &std::path::Path, extra: Value) -> std::path::PathBuf {
    let mut base = json!({
        "target": "Y",
        "split_date": date_of(59),
        "variant": "SSRF1",
        "regressor": "LASSO",
        "keep_fraction": 0.5,
        "r": 2,
        "cv_window": 8,
        "tune_window": 6
    });
    for (k, v) in extra.as_object().unwrap() {
        base[k] = v.clone();
    }
    write_json(dir, "run.json", &base)
}

fn toy(dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
    write_dataset(dir, &synthetic_columns(80, 2, 1, 1, 7))
}

#[test]
fn forecast_toy_panel() {
    let tmp = TempDir::new().unwrap();
    let (data, spec) = toy(tmp.path());
    let cfg = run_config(tmp.path(), json!({}));
    let out = tmp.path().join("out");
    let o = run(&["forecast", s(&data), s(&spec), s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let msfe = summary["msfe"].as_f64().unwrap();
    assert!(msfe.is_finite() && msfe > 0.0);
    assert_eq!(summary["n_forecasts"], 20);

    let (header, rows) = read_csv(&out.join("forecasts.csv"));
    assert_eq!(header[0], "origin_time");
    assert_eq!(rows.len(), 20);
    assert_eq!(rows[0][1], date_of(59));
    assert_eq!(rows[0][2], date_of(60));

    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "forecast");
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["output_paths"], json!(["forecasts.csv", "summary.json"]));
}

#[test]
fn forecast_with_eigen_shares() {
    let tmp = TempDir::new().unwrap();
    let (data, spec) = toy(tmp.path());
    let cfg = run_config(tmp.path(), json!({"emit_eigen_shares": true, "split_date": date_of(74)}));
    let out = tmp.path().join("out");
    let o = run(&["forecast", s(&data), s(&spec), s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.join("eigen_shares.csv"));
    assert_eq!(header, ["origin_time", "origin_date", "space", "component", "share"]);
    // 5 origins, one space, min(k, T) = 2 eigenvalues reported per origin
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn unknown_target() {
    let tmp = TempDir::new().unwrap();
    let (data, spec) = toy(tmp.path());
    let cfg = run_config(tmp.path(), json!({"target": "NOPE"}));
    let o = run(&["forecast", s(&data), s(&spec), s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ERROR UnknownSeries:"), "{}", stderr(&o));
}

#[test]
fn split_after_sample() {
    let tmp = TempDir::new().unwrap();
    let (data, spec) = toy(tmp.path());
    let cfg = run_config(tmp.path(), json!({"split_date": "2030-01"}));
    let o = run(&["forecast", s(&data), s(&spec), s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ERROR InsufficientData:"), "{}", stderr(&o));
}

#[test]
fn invalid_pipeline_field() {
    let tmp = TempDir::new().unwrap();
    let (data, spec) = toy(tmp.path());
    let cfg = run_config(tmp.path(), json!({"variant": "PCA", "keep_fraction": 0.5}));
    let o = run(&["forecast", s(&data), s(&spec), s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ERROR ConfigInvalid:"), "{}", stderr(&o));
}

fn tune_panel(dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
    write_dataset(dir, &synthetic_columns(90, 5, 40, 5, 11))
}

fn tune_best(dir: &std::path::Path, grid: Value) -> std::process::Output {
    let (data, spec) = tune_panel(dir);
    let cfg = run_config(
        dir,
        json!({"variant": "SRPCA", "r": 1, "tune_grid": grid, "split_date": date_of(79)}),
    );
    run(&["tune", s(&data), s(&spec), s(&cfg), "--out", s(&dir.join("out"))])
}

#[test]
fn tune_single_point_grid() {
    let tmp = TempDir::new().unwrap();
    let o = tune_best(tmp.path(), json!([1.0]));
    assert!(o.status.success(), "{}", stderr(&o));
    let t: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/tune.json")).unwrap()).unwrap();
    assert_eq!(t["best_fraction"], 1.0);
    let (header, rows) = read_csv(&tmp.path().join("out/cv_table.csv"));
    assert_eq!(header, ["keep_fraction", "cv_msfe"]);
    assert_eq!(rows.len(), 1);
}

#[test]
fn tune_prefers_screening_when_one_factor_predicts() {
    let tmp = TempDir::new().unwrap();
    let o = tune_best(tmp.path(), json!([0.1, 1.0]));
    assert!(o.status.success(), "{}", stderr(&o));
    let t: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/tune.json")).unwrap()).unwrap();
    assert_eq!(t["best_fraction"], 0.1);
}

#[test]
fn tune_empty_grid() {
    let tmp = TempDir::new().unwrap();
    let o = tune_best(tmp.path(), json!([]));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ERROR ConfigInvalid:"), "{}", stderr(&o));
}

#[test]
fn eigen_report_shape() {
    let tmp = TempDir::new().unwrap();
    let (data, spec) = tune_panel(tmp.path());
    let cfg = run_config(tmp.path(), json!({"r": 3, "split_date": date_of(79)}));
    let out = tmp.path().join("out");
    let o = run(&["eigen-report", s(&data), s(&spec), s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let (header, rows) = read_csv(&out.join("eigen_shares.csv"));
    assert_eq!(header, ["component", "PCA", "sPCA", "srPCA", "SSPCA-f", "SSPCA-d"]);
    assert_eq!(rows.len(), 15);
    let col = |m: usize| -> Vec<f64> { rows.iter().map(|r| r[m].parse().unwrap()).collect() };
    for m in 1..=5 {
        let c = col(m);
        assert!(c.iter().sum::<f64>() <= 1.0 + 1e-12);
        assert!(c.windows(2).all(|w| w[0] >= w[1] - 1e-15));
    }
    assert!(col(4)[0] > col(1)[0], "SSPCA-f {} vs PCA {}", col(4)[0], col(1)[0]);

    let (lh, lrows) = read_csv(&out.join("loadings.csv"));
    assert_eq!(&lh[..3], ["method", "variable", "group"]);
    // PCA keeps all 50 predictors
    assert_eq!(lrows.iter().filter(|r| r[0] == "PCA").count(), 50);
    assert!(lrows.iter().all(|r| r[1] != "Y"));
}

fn sim_spec(dir: &std::path::Path) -> std::path::PathBuf {
    write_json(
        dir,
        "sim.json",
        &json!({
            "dgp": {"dgp": 1, "p": 60, "T": 50},
            "pipeline": {"variant": "SSRF1", "regressor": "LASSO", "r": 4, "cv_window": 5},
            "n_reps": 3,
            "keep_fractions": [0.5, 1.0],
            "first_origin": 46,
            "last_origin": 49
        }),
    )
}

#[test]
fn simulate_rows_per_fraction() {
    let tmp = TempDir::new().unwrap();
    let spec = sim_spec(tmp.path());
    let out = tmp.path().join("out");
    let o = run(&["simulate", s(&spec), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.join("simulation.csv"));
    assert_eq!(header, ["keep_fraction", "strength_config", "recovery_rate", "mean_norm", "mean_msfe"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "0.5");
    assert_eq!(rows[1][1], "(1,1,1,1)");
    for r in &rows {
        let rate: f64 = r[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&rate));
        assert!(r[4].parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn simulate_malformed_json() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path().join("bad.json");
    std::fs::write(&p, "{\n  \"dgp\": {\"dgp\": 1},\n  \"n_reps\": ,\n}").unwrap();
    let o = run(&["simulate", s(&p), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.starts_with("ERROR ParseError:"), "{e}");
    assert!(e.contains("line 3 column"), "{e}");
    assert_eq!(e.trim_end().lines().count(), 1);
}

#[test]
fn simulate_rerun_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let spec = sim_spec(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&["simulate", s(&spec), "--out", s(&a), "--threads", "1"]).status.success());
    assert!(run(&["simulate", s(&spec), "--out", s(&b), "--threads", "4"]).status.success());
    for f in ["simulation.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    assert!(run(&["simulate", s(&spec), "--out", s(&c), "--seed", "7"]).status.success());
    assert_ne!(std::fs::read(a.join("simulation.csv")).unwrap(), std::fs::read(c.join("simulation.csv")).unwrap());
}

#[test]
fn zero_threads_rejected() {
    let tmp = TempDir::new().unwrap();
    let spec = sim_spec(tmp.path());
    let o = run(&["simulate", s(&spec), "--threads", "0", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ERROR ConfigInvalid:"));
}
