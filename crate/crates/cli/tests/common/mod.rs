#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ssrf_core::numerics::SeededRng;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssrf"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).env("SOURCE_DATE_EPOCH", "1700000000").output().expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ar1(rng: &mut SeededRng, phi: f64, n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n);
    let mut prev = 0.0;
    for e in rng.normal_vec(n) {
        prev = phi * prev + e;
        v.push(prev);
    }
    v
}

/// Series name, group, values.
pub type Column = (String, &'static str, Vec<f64>);

/// `n_f` series load on a predictive factor f, `n_g` on an unrelated factor g,
/// `n_noise` are pure noise, and `Y_t = f_{t−1} + noise`.
pub fn synthetic_columns(t: usize, n_f: usize, n_g: usize, n_noise: usize, seed: u64) -> Vec<Column> {
    let mut rng = SeededRng::new(seed, 0);
    let f = ar1(&mut rng, 0.7, t + 1);
    let g = ar1(&mut rng, 0.5, t);
    let mut cols = Vec::new();
    for j in 0..n_f {
        let e = rng.normal_vec(t);
        cols.push((format!("F{j}"), "OUT", (0..t).map(|s| f[s + 1] + 0.3 * e[s]).collect()));
    }
    for j in 0..n_g {
        let e = rng.normal_vec(t);
        cols.push((format!("G{j}"), "PR", (0..t).map(|s| g[s] + 0.5 * e[s]).collect()));
    }
    for j in 0..n_noise {
        cols.push((format!("N{j}"), "MC", rng.normal_vec(t)));
    }
    let e = rng.normal_vec(t);
    cols.push(("Y".into(), "CON", (0..t).map(|s| f[s] + 0.3 * e[s]).collect()));
    cols
}

pub fn date_of(i: usize) -> String {
    let m = 1996 * 12 + i;
    format!("{:04}-{:02}", m / 12, m % 12 + 1)
}

/// Writes `data.csv` and `series.json` (every tcode 1) into `dir`.
pub fn write_dataset(dir: &Path, cols: &[Column]) -> (PathBuf, PathBuf) {
    let t = cols[0].2.len();
    let mut csv = String::from("date");
    for (name, _, _) in cols {
        csv.push(',');
        csv.push_str(name);
    }
    csv.push('\n');
    for s in 0..t {
        csv.push_str(&date_of(s));
        for (_, _, v) in cols {
            csv.push_str(&format!(",{}", v[s]));
        }
        csv.push('\n');
    }
    let specs: Vec<serde_json::Value> = cols
        .iter()
        .enumerate()
        .map(|(i, (name, group, _))| serde_json::json!({"id": i + 1, "name": name, "tcode": 1, "group": group}))
        .collect();
    let data = dir.join("data.csv");
    let spec = dir.join("series.json");
    std::fs::write(&data, csv).unwrap();
    std::fs::write(&spec, serde_json::to_string_pretty(&specs).unwrap()).unwrap();
    (data, spec)
}

pub fn write_json(dir: &Path, name: &str, v: &serde_json::Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
