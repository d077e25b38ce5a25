//! CSV readers for price series and labelled feature tables.
//!
//! Price files: a header row with a `Date` column (ISO-8601 date or
//! date-time) and a numeric value column, rows in strictly increasing date
//! order. Tabular files: a header row, numeric feature columns and one binary
//! label column; rows with an empty or `NA`/`NaN` cell are dropped.

use std::fs::File;
use std::path::Path;

use brelu_core::data::{standardize, PriceSeries, TabularDataset};
use brelu_core::Matrix;
use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime};

use crate::error::{LabError, Result};

pub const DATE_COLUMN: &str = "Date";
pub const DEFAULT_PRICE_COLUMN: &str = "Close";
pub const DEFAULT_LABEL_COLUMN: &str = "label";

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| LabError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn headers(path: &Path, rdr: &mut csv::Reader<File>) -> Result<Vec<String>> {
    let h = rdr
        .headers()
        .map_err(|e| LabError::data(path, format!("cannot read header: {e}")))?;
    Ok(h.iter().map(str::to_owned).collect())
}

fn column_index(path: &Path, headers: &[String], name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| {
        LabError::data(
            path,
            format!(
                "column \"{name}\" not found; available columns: {}",
                headers.join(", ")
            ),
        )
    })
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d.and_time(NaiveTime::MIN));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.naive_utc())
}

fn format_timestamp(t: &NaiveDateTime) -> String {
    if t.time() == NaiveTime::MIN {
        t.format("%Y-%m-%d").to_string()
    } else {
        t.format("%Y-%m-%dT%H:%M:%S%.f").to_string()
    }
}

/// Reads `column` against the `Date` column. Row numbers in errors are file
/// line numbers, the header being line 1.
pub fn load_csv_prices(path: impl AsRef<Path>, column: &str) -> Result<PriceSeries> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = headers(path, &mut rdr)?;
    let date_at = column_index(path, &headers, DATE_COLUMN)?;
    let value_at = column_index(path, &headers, column)?;

    let mut stamps: Vec<NaiveDateTime> = Vec::new();
    let mut values = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| LabError::data(path, format!("row {row}: {e}")))?;
        let date = record.get(date_at).unwrap_or("");
        let stamp = parse_timestamp(date)
            .ok_or_else(|| LabError::data(path, format!("row {row}: bad date \"{date}\"")))?;
        let raw = record.get(value_at).unwrap_or("");
        let value: f64 = raw.parse().map_err(|_| {
            LabError::data(
                path,
                format!("row {row}: cannot parse {column} value \"{raw}\""),
            )
        })?;
        if !(value.is_finite() && value > 0.0) {
            return Err(LabError::data(
                path,
                format!("row {row}: {column} must be finite and positive, got {raw}"),
            ));
        }
        if let Some(prev) = stamps.last() {
            if stamp <= *prev {
                return Err(LabError::data(
                    path,
                    format!(
                        "row {row}: date {date} is not after {}; dates must be strictly increasing",
                        format_timestamp(prev)
                    ),
                ));
            }
        }
        stamps.push(stamp);
        values.push(value);
    }
    if values.is_empty() {
        return Err(LabError::data(path, "no data rows"));
    }
    let stamps = stamps.iter().map(format_timestamp).collect();
    PriceSeries::new(stamps, values).map_err(|e| LabError::data(path, e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularLoad {
    pub data: TabularDataset,
    /// Rows dropped for missing values.
    pub dropped: usize,
    /// Raw label values mapped to 0 and 1.
    pub classes: [String; 2],
    pub feature_names: Vec<String>,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

/// Numeric labels sort numerically, anything else lexically; the first class
/// maps to 0. Plain `0`/`1` columns keep their values (the flag is `true`).
fn label_classes(path: &Path, raw: &[String]) -> Result<([String; 2], bool)> {
    let mut distinct: Vec<&String> = Vec::new();
    for r in raw {
        if !distinct.contains(&r) {
            distinct.push(r);
        }
    }
    let numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(nums) = &numeric {
        if nums.iter().all(|&v| v == 0.0 || v == 1.0) {
            let zero = distinct
                .iter()
                .zip(nums)
                .find(|(_, &v)| v == 0.0)
                .map(|(s, _)| (*s).clone());
            let one = distinct
                .iter()
                .zip(nums)
                .find(|(_, &v)| v == 1.0)
                .map(|(s, _)| (*s).clone());
            return Ok((
                [
                    zero.unwrap_or_else(|| "0".into()),
                    one.unwrap_or_else(|| "1".into()),
                ],
                true,
            ));
        }
    }
    if distinct.len() != 2 {
        let shown: Vec<&str> = distinct.iter().take(5).map(|s| s.as_str()).collect();
        return Err(LabError::data(
            path,
            format!(
                "label column must be binary, found {} classes ({})",
                distinct.len(),
                shown.join(", ")
            ),
        ));
    }
    let (a, b) = (distinct[0].clone(), distinct[1].clone());
    let a_first = match &numeric {
        Some(nums) => nums[0] < nums[1],
        None => a < b,
    };
    Ok((if a_first { [a, b] } else { [b, a] }, false))
}

/// Reads a feature table, drops incomplete rows and z-scores every feature.
pub fn load_csv_tabular(path: impl AsRef<Path>, label_column: &str) -> Result<TabularLoad> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = headers(path, &mut rdr)?;
    let label_at = column_index(path, &headers, label_column)?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != label_at).collect();
    if feature_cols.is_empty() {
        return Err(LabError::data(path, "no feature columns"));
    }

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dropped = 0;
    for (k, record) in rdr.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| LabError::data(path, format!("row {row}: {e}")))?;
        let cell = |c: usize| record.get(c).unwrap_or("");
        if is_missing(cell(label_at)) || feature_cols.iter().any(|&c| is_missing(cell(c))) {
            dropped += 1;
            continue;
        }
        for &c in &feature_cols {
            let v: f64 = cell(c).parse().map_err(|_| {
                LabError::data(
                    path,
                    format!(
                        "row {row}: column {} is not numeric: \"{}\"",
                        headers[c],
                        cell(c)
                    ),
                )
            })?;
            if !v.is_finite() {
                return Err(LabError::data(
                    path,
                    format!("row {row}: column {} is not finite", headers[c]),
                ));
            }
            features.push(v);
        }
        raw_labels.push(cell(label_at).to_owned());
    }
    if raw_labels.is_empty() {
        return Err(LabError::data(
            path,
            format!("no complete rows ({dropped} dropped)"),
        ));
    }
    let (classes, zero_one) = label_classes(path, &raw_labels)?;
    let labels = raw_labels
        .iter()
        .map(|l| {
            let positive = if zero_one {
                l.parse::<f64>() == Ok(1.0)
            } else {
                *l == classes[1]
            };
            if positive {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mut matrix = Matrix::new(raw_labels.len(), feature_cols.len(), features)?;
    standardize(&mut matrix);
    Ok(TabularLoad {
        data: TabularDataset::new(matrix, labels)?,
        dropped,
        classes,
        feature_names: feature_cols.iter().map(|&c| headers[c].clone()).collect(),
    })
}
