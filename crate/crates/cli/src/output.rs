//! Output files, schema self-checks and the run manifest.

use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    /// Relative to the output directory.
    pub output_paths: Vec<String>,
    pub tool_version: String,
}

/// Current time, or `SOURCE_DATE_EPOCH` when set so manifests can be reproduced byte for byte.
pub fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0));
    fixed.unwrap_or_else(Utc::now).to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn config_hash<T: Serialize>(resolved: &T) -> CliResult<String> {
    let bytes = serde_json::to_vec(resolved).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Collects declared outputs under one directory.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        drop(w);
        check_csv(&path, header, rows.len())?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
        let back = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str::<serde_json::Value>(&back).map_err(|e| CliError::SelfCheck {
            path: path.clone(),
            detail: e.to_string(),
        })?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` listing every output written so far.
    pub fn finish(mut self, command: &str, config_hash: String, seed: u64, started: String) -> CliResult<()> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_hash,
            seed,
            started,
            finished: timestamp(),
            output_paths: self.written.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        self.write_json("manifest.json", &manifest)
    }
}

/// Re-reads a CSV and checks its header and row shape.
fn check_csv(path: &Path, header: &[&str], n_rows: usize) -> CliResult<()> {
    let fail = |detail: String| CliError::SelfCheck {
        path: path.to_path_buf(),
        detail,
    };
    let mut r = csv::Reader::from_path(path)?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(fail(format!("header {got:?}")));
    }
    let mut count = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(fail(format!("row {} has {} fields", count + 1, rec.len())));
        }
        count += 1;
    }
    if count != n_rows {
        return Err(fail(format!("{count} rows read back, {n_rows} written")));
    }
    Ok(())
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable() {
        let a = config_hash(&serde_json::json!({"a": 1, "b": [1.5, 2.0]})).unwrap();
        let b = config_hash(&serde_json::json!({"a": 1, "b": [1.5, 2.0]})).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        assert_ne!(a, config_hash(&serde_json::json!({"a": 2})).unwrap());
    }

    #[test]
    fn pinned_timestamp() {
        std::env::set_var("SOURCE_DATE_EPOCH", "0");
        assert_eq!(timestamp(), "1970-01-01T00:00:00Z");
        std::env::remove_var("SOURCE_DATE_EPOCH");
    }
}
