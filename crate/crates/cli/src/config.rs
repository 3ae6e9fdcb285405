//! Run configuration for the data-driven commands: a pipeline configuration
//! plus the keys that pick the target and the train/test split.

use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use ssrf_core::pipeline::PipelineConfig;
use ssrf_core::transform::YearMonth;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub target: String,
    /// Last period of the training sample.
    pub split_date: YearMonth,
    pub exclude_target: bool,
    pub tune_grid: Option<Vec<f64>>,
    pub emit_eigen_shares: bool,
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
}

fn take<T: serde::de::DeserializeOwned>(map: &mut Map<String, Value>, key: &str, path: &Path) -> CliResult<Option<T>> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v).map(Some).map_err(|e| CliError::Config(format!(
            "{}: field `{key}`: {e}",
            path.display()
        ))),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// The run keys are peeled off first; the remainder must be a valid
    /// pipeline configuration with no unknown fields.
    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let value: Value = serde_json::from_str(text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let Value::Object(mut map) = value else {
            return Err(CliError::Config(format!("{}: expected a JSON object", path.display())));
        };
        let target: String = take(&mut map, "target", path)?
            .ok_or_else(|| CliError::Config(format!("{}: missing field `target`", path.display())))?;
        let split_date: YearMonth = take(&mut map, "split_date", path)?
            .ok_or_else(|| CliError::Config(format!("{}: missing field `split_date`", path.display())))?;
        let exclude_target = take(&mut map, "exclude_target", path)?.unwrap_or(true);
        let tune_grid = take(&mut map, "tune_grid", path)?;
        let emit_eigen_shares = take(&mut map, "emit_eigen_shares", path)?.unwrap_or(false);
        let pipeline: PipelineConfig = serde_json::from_value(Value::Object(map))
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        pipeline.validate()?;
        Ok(Self {
            target,
            split_date,
            exclude_target,
            tune_grid,
            emit_eigen_shares,
            pipeline,
        })
    }
}
