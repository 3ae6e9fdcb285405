//! Dataset ingestion and per-series stationarity transformations (tcodes 1–7).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::{standardize, Matrix};

/// Macroeconomic category of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "OUT")]
    Output,
    #[serde(rename = "SM")]
    StockMarket,
    #[serde(rename = "PR")]
    Prices,
    #[serde(rename = "IER")]
    InterestExchange,
    #[serde(rename = "MC")]
    MoneyCredit,
    #[serde(rename = "CON")]
    Consumption,
    #[serde(rename = "INV")]
    Investment,
}

impl Group {
    pub fn code(&self) -> &'static str {
        match self {
            Group::Output => "OUT",
            Group::StockMarket => "SM",
            Group::Prices => "PR",
            Group::InterestExchange => "IER",
            Group::MoneyCredit => "MC",
            Group::Consumption => "CON",
            Group::Investment => "INV",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub id: u32,
    pub name: String,
    pub tcode: u8,
    pub group: Group,
}

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    /// Months since year 0, used for spacing checks.
    pub fn ordinal(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    /// Accepts `YYYY-MM` or `YYYY-MM-DD` (the day is ignored).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let full = if s.len() == 7 { format!("{s}-01") } else { s.to_string() };
        let d = NaiveDate::parse_from_str(&full, "%Y-%m-%d")
            .map_err(|e| Error::ParseError(format!("bad date `{s}`: {e}")))?;
        Ok(YearMonth {
            year: d.year(),
            month: d.month(),
        })
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Transformed, aligned and standardized panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dates: Vec<YearMonth>,
    /// p×T, one standardized row per retained series.
    pub panel: Matrix,
    /// Specs of the retained rows, in row order.
    pub specs: Vec<SeriesSpec>,
    /// Leading periods lost to differencing.
    pub drop_offset: usize,
    /// Series dropped as constant after transformation.
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn n_series(&self) -> usize {
        self.panel.rows()
    }

    pub fn n_periods(&self) -> usize {
        self.panel.cols()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    /// Index of the last period at or before `date`.
    pub fn period_index(&self, date: YearMonth) -> Option<usize> {
        self.dates.iter().rposition(|d| *d <= date)
    }

    /// Builds a dataset from raw (untransformed) columns.
    pub fn from_raw(dates: Vec<YearMonth>, columns: Vec<Vec<f64>>, specs: Vec<SeriesSpec>) -> Result<Self> {
        if columns.len() != specs.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} columns but {} series specs",
                columns.len(),
                specs.len()
            )));
        }
        if specs.is_empty() {
            return Err(Error::SchemaMismatch("no series".into()));
        }
        check_dates(&dates)?;
        let n = dates.len();
        let mut loss_max = 0usize;
        for s in &specs {
            loss_max = loss_max.max(tcode_loss(s.tcode)?);
        }
        let mut rows = Vec::with_capacity(specs.len());
        let mut kept = Vec::with_capacity(specs.len());
        let mut warnings = Vec::new();
        for (col, spec) in columns.iter().zip(&specs) {
            if col.len() != n {
                return Err(Error::SchemaMismatch(format!(
                    "series `{}` has {} values for {} dates",
                    spec.name,
                    col.len(),
                    n
                )));
            }
            let transformed = apply_tcode(col, spec.tcode)?;
            let loss = tcode_loss(spec.tcode)?;
            let aligned = &transformed[loss_max - loss..];
            match standardize(aligned) {
                Ok(z) => {
                    rows.push(z);
                    kept.push(spec.clone());
                }
                Err(Error::ConstantSeries { .. }) => {
                    warnings.push(format!(
                        "series `{}` is constant after transformation and was dropped",
                        spec.name
                    ));
                }
                Err(e) => return Err(e),
            }
        }
        if rows.is_empty() {
            return Err(Error::InsufficientData("every series was constant".into()));
        }
        Ok(Dataset {
            dates: dates[loss_max..].to_vec(),
            panel: Matrix::from_rows(&rows)?,
            specs: kept,
            drop_offset: loss_max,
            warnings,
        })
    }
}

fn check_dates(dates: &[YearMonth]) -> Result<()> {
    for w in dates.windows(2) {
        if w[1].ordinal() != w[0].ordinal() + 1 {
            return Err(Error::NonMonotoneDates(format!("{} followed by {}", w[0], w[1])));
        }
    }
    Ok(())
}

/// Number of leading observations consumed by a tcode.
pub fn tcode_loss(tcode: u8) -> Result<usize> {
    match tcode {
        1 | 4 => Ok(0),
        2 | 5 => Ok(1),
        3 | 6 | 7 => Ok(2),
        _ => Err(Error::ConfigInvalid(format!("tcode {tcode} is not in 1..=7"))),
    }
}

fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

fn log_series(x: &[f64]) -> Result<Vec<f64>> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > 0.0 {
                Ok(v.ln())
            } else {
                Err(Error::NonPositiveForLog { index: i, value: v })
            }
        })
        .collect()
}

/// Applies a stationarity transformation, dropping leading undefined values.
///
/// 1 level, 2 Δx, 3 Δ²x, 4 ln x, 5 Δln x, 6 Δ²ln x, 7 Δ(x_t/x_{t−1} − 1).
pub fn apply_tcode(series: &[f64], tcode: u8) -> Result<Vec<f64>> {
    let loss = tcode_loss(tcode)?;
    if series.len() < loss + 1 {
        return Err(Error::TooShort {
            required: loss + 1,
            actual: series.len(),
        });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("series value at index {i}"),
        });
    }
    let out = match tcode {
        1 => series.to_vec(),
        2 => diff(series),
        3 => diff(&diff(series)),
        4 => log_series(series)?,
        5 => diff(&log_series(series)?),
        6 => diff(&diff(&log_series(series)?)),
        7 => {
            let mut growth = Vec::with_capacity(series.len() - 1);
            for (i, w) in series.windows(2).enumerate() {
                if w[0] == 0.0 {
                    return Err(Error::DivisionByZero { index: i });
                }
                growth.push(w[1] / w[0] - 1.0);
            }
            diff(&growth)
        }
        _ => unreachable!(),
    };
    Ok(out)
}

/// Reads a CSV panel (header row, first column `date`) and a JSON array of series specs.
pub fn load_dataset(data_path: &Path, spec_path: &Path) -> Result<Dataset> {
    let spec_text = std::fs::read_to_string(spec_path)?;
    let specs: Vec<SeriesSpec> = serde_json::from_str(&spec_text)
        .map_err(|e| Error::ParseError(format!("{}: {e}", spec_path.display())))?;
    let file = std::fs::File::open(data_path)?;
    read_dataset(file, specs)
}

/// Parses CSV content against already-loaded specs.
pub fn read_dataset<R: std::io::Read>(reader: R, specs: Vec<SeriesSpec>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::ParseError(e.to_string()))?
        .clone();
    if headers.get(0).map(str::trim) != Some("date") {
        return Err(Error::SchemaMismatch("first column must be `date`".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();

    // map each spec to its column by name, or by id as a fallback
    let mut col_of_spec = Vec::with_capacity(specs.len());
    for s in &specs {
        let pos = names
            .iter()
            .position(|n| *n == s.name)
            .or_else(|| names.iter().position(|n| *n == s.id.to_string()));
        match pos {
            Some(p) => col_of_spec.push(p),
            None => {
                return Err(Error::SchemaMismatch(format!(
                    "series `{}` (id {}) has no column in the data file",
                    s.name, s.id
                )))
            }
        }
    }
    let mut seen = col_of_spec.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != specs.len() {
        return Err(Error::SchemaMismatch("two specs map to the same column".into()));
    }
    if names.len() != specs.len() {
        let extra: Vec<&str> = names
            .iter()
            .enumerate()
            .filter(|(i, _)| !col_of_spec.contains(i))
            .map(|(_, n)| n.as_str())
            .collect();
        return Err(Error::SchemaMismatch(format!("columns without a spec: {extra:?}")));
    }

    let mut dates = Vec::new();
    let mut raw: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::ParseError(e.to_string()))?;
        if rec.len() != names.len() + 1 {
            return Err(Error::ParseError(format!(
                "data row {} has {} fields, expected {}",
                line + 1,
                rec.len(),
                names.len() + 1
            )));
        }
        dates.push(rec[0].parse::<YearMonth>()?);
        for (j, field) in rec.iter().skip(1).enumerate() {
            let f = field.trim();
            let v: f64 = f.parse().map_err(|_| {
                Error::ParseError(format!(
                    "data row {} column `{}`: `{f}` is not a number",
                    line + 1,
                    names[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::ParseError(format!(
                    "data row {} column `{}` is missing or non-finite",
                    line + 1,
                    names[j]
                )));
            }
            raw[j].push(v);
        }
    }
    let columns = col_of_spec.iter().map(|&c| std::mem::take(&mut raw[c])).collect();
    Dataset::from_raw(dates, columns, specs)
}

/// The standardized, transformed series called `name`.
pub fn target_series(dataset: &Dataset, name: &str) -> Result<Vec<f64>> {
    dataset
        .index_of(name)
        .map(|i| dataset.panel.row(i).to_vec())
        .ok_or_else(|| Error::UnknownSeries(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{mean, variance};

    fn spec(id: u32, name: &str, tcode: u8) -> SeriesSpec {
        SeriesSpec {
            id,
            name: name.into(),
            tcode,
            group: Group::Output,
        }
    }

    #[test]
    fn first_differences() {
        assert_eq!(apply_tcode(&[1.0, 3.0, 6.0], 2).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn log_differences_of_geometric() {
        let e = std::f64::consts::E;
        let out = apply_tcode(&[1.0, e, e * e], 5).unwrap();
        for v in out {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn growth_rate_difference() {
        assert_eq!(apply_tcode(&[1.0, 2.0, 4.0], 7).unwrap(), vec![0.0]);
    }

    #[test]
    fn lengths_and_errors() {
        let x = [1.0, 2.0, 4.0, 7.0, 11.0];
        for (code, loss) in [(1, 0), (2, 1), (3, 2), (4, 0), (5, 1), (6, 2), (7, 2)] {
            assert_eq!(apply_tcode(&x, code).unwrap().len(), x.len() - loss);
        }
        assert!(matches!(apply_tcode(&[1.0, -1.0], 4), Err(Error::NonPositiveForLog { index: 1, .. })));
        assert!(matches!(apply_tcode(&[1.0, 0.0, 2.0], 7), Err(Error::DivisionByZero { index: 1 })));
        assert!(matches!(apply_tcode(&[1.0, 2.0], 3), Err(Error::TooShort { .. })));
        assert!(matches!(apply_tcode(&[1.0], 8), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn year_month_parsing() {
        let d: YearMonth = "1996-11".parse().unwrap();
        assert_eq!(d, YearMonth { year: 1996, month: 11 });
        assert_eq!(d.to_string(), "1996-11");
        assert_eq!("2001-02-15".parse::<YearMonth>().unwrap().month, 2);
        assert!("2001-13".parse::<YearMonth>().is_err());
    }

    #[test]
    fn toy_dataset_is_aligned_and_standardized() {
        let csv = "date,a,b,c\n\
                   2000-01,1.0,1.0,1.0\n\
                   2000-02,2.0,3.0,2.0\n\
                   2000-03,4.0,4.0,8.0\n\
                   2000-04,3.0,8.0,4.0\n";
        let ds = read_dataset(csv.as_bytes(), vec![spec(1, "a", 1), spec(2, "b", 2), spec(3, "c", 5)]).unwrap();
        assert_eq!(ds.drop_offset, 1);
        assert_eq!(ds.dates.len(), 3);
        assert_eq!(ds.dates[0].to_string(), "2000-02");
        // hand-built expected rows before standardization
        let a = [2.0, 4.0, 3.0];
        let b = [2.0, 1.0, 4.0];
        let c = [2f64.ln(), 4f64.ln(), 0.5f64.ln()];
        for (row, raw) in [a.as_slice(), &b, &c].iter().enumerate() {
            let m = raw.iter().sum::<f64>() / 3.0;
            let sd = (raw.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 3.0).sqrt();
            for (t, v) in raw.iter().enumerate() {
                assert!((ds.panel[(row, t)] - (v - m) / sd).abs() < 1e-12);
            }
            assert!(mean(ds.panel.row(row)).abs() < 1e-12);
            assert!((variance(ds.panel.row(row)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_is_dropped_with_warning() {
        let csv = "date,a,flat\n2000-01,1,5\n2000-02,3,5\n2000-03,2,5\n";
        let ds = read_dataset(csv.as_bytes(), vec![spec(1, "a", 1), spec(2, "flat", 1)]).unwrap();
        assert_eq!(ds.n_series(), 1);
        assert_eq!(ds.warnings.len(), 1);
        assert!(ds.warnings[0].contains("flat"));
        assert!(matches!(target_series(&ds, "flat"), Err(Error::UnknownSeries(_))));
    }

    #[test]
    fn schema_errors() {
        let csv = "date,a\n2000-01,1\n2000-02,3\n";
        let err = read_dataset(csv.as_bytes(), vec![spec(1, "a", 1), spec(2, "missing", 1)]).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(_)));
        let err = read_dataset(csv.as_bytes(), vec![]).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(_)));
    }

    #[test]
    fn missing_cell_and_bad_dates() {
        let csv = "date,a\n2000-01,1\n2000-02,\n2000-03,2\n";
        assert!(matches!(read_dataset(csv.as_bytes(), vec![spec(1, "a", 1)]), Err(Error::ParseError(_))));
        let csv = "date,a\n2000-02,1\n2000-01,2\n2000-03,2\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), vec![spec(1, "a", 1)]),
            Err(Error::NonMonotoneDates(_))
        ));
        let csv = "date,a\n2000-01,1\n2000-03,2\n2000-04,2\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), vec![spec(1, "a", 1)]),
            Err(Error::NonMonotoneDates(_))
        ));
    }

    #[test]
    fn target_returns_row_even_if_also_predictor() {
        let csv = "date,a,b\n2000-01,1,2\n2000-02,3,1\n2000-03,2,7\n";
        let ds = read_dataset(csv.as_bytes(), vec![spec(1, "a", 1), spec(2, "b", 1)]).unwrap();
        assert_eq!(target_series(&ds, "b").unwrap(), ds.panel.row(1).to_vec());
        assert!(matches!(target_series(&ds, "missing"), Err(Error::UnknownSeries(_))));
    }

    #[test]
    fn spec_json_shape() {
        let s: Vec<SeriesSpec> =
            serde_json::from_str(r#"[{"id": 3, "name": "cpi", "tcode": 5, "group": "PR"}]"#).unwrap();
        assert_eq!(s[0].group, Group::Prices);
        assert!(serde_json::from_str::<Vec<SeriesSpec>>(r#"[{"id":1,"name":"x","tcode":1,"group":"FOO"}]"#).is_err());
    }
}
