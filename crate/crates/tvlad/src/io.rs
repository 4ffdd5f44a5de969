//! CSV ingestion and series export.
//!
//! Ingestion accepts any RFC-4180 CSV with a header row, selects a column
//! by name or zero-based index, and optionally maps a price column to
//! forward log returns `y_t = log(s_{t+1} / s_t)` (length n - 1). Series
//! export writes two columns `(t, value)` under comment lines carrying the
//! model JSON and the seed, so exported files re-ingest losslessly.

use crate::error::{Error, Result};
use crate::process::TvSeries;
use std::path::Path;

/// Column selector: header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSel {
    Name(String),
    Index(usize),
}

impl ColumnSel {
    /// Parses a CLI argument: a bare integer selects by position,
    /// everything else by header name.
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => ColumnSel::Index(i),
            Err(_) => ColumnSel::Name(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transform {
    #[default]
    None,
    LogReturn,
}

/// Reads one numeric column. Non-numeric cells and, under `LogReturn`,
/// nonpositive prices are reported with their 1-based data row number.
pub fn ingest_csv(path: &Path, column: &ColumnSel, transform: Transform) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .clone();
    let col = match column {
        ColumnSel::Index(i) => {
            if *i >= headers.len() {
                return Err(Error::Data(format!(
                    "column index {i} out of range; file has {} columns",
                    headers.len()
                )));
            }
            *i
        }
        ColumnSel::Name(name) => headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Data(format!(
                "column '{name}' not found; available: {}",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?,
    };

    let mut values = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 1;
        let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        let cell = record
            .get(col)
            .ok_or_else(|| Error::Data(format!("row {row}: missing column {col}")))?;
        let value: f64 = cell
            .parse()
            .map_err(|_| Error::Data(format!("row {row}: non-numeric cell '{cell}'")))?;
        if !value.is_finite() {
            return Err(Error::Data(format!("row {row}: non-finite value {value}")));
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(Error::Data("selected column is empty".into()));
    }

    match transform {
        Transform::None => Ok(values),
        Transform::LogReturn => {
            if values.len() < 2 {
                return Err(Error::Data("log returns need at least two prices".into()));
            }
            for (i, s) in values.iter().enumerate() {
                if *s <= 0.0 {
                    return Err(Error::Data(format!(
                        "row {}: nonpositive price {s} cannot be log-transformed",
                        i + 1
                    )));
                }
            }
            Ok(values.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
        }
    }
}

/// Writes a simulated series as CSV: comment lines with the model JSON and
/// seed, then `t,value` rows. Values are round-trip exact via `{:?}`
/// formatting.
pub fn write_series_csv(path: &Path, series: &TvSeries) -> Result<()> {
    write_series_csv_with_comments(path, series, &[])
}

/// Like [`write_series_csv`] with extra caller comment lines (written
/// after the model and seed, each prefixed with `# `).
pub fn write_series_csv_with_comments(
    path: &Path,
    series: &TvSeries,
    extra: &[String],
) -> Result<()> {
    let model_json = serde_json::to_string(&series.model)
        .map_err(|e| Error::Data(format!("model serialization failed: {e}")))?;
    let mut out = String::new();
    out.push_str(&format!("# model={model_json}\n"));
    out.push_str(&format!("# seed={}\n", series.seed));
    for line in extra {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str("t,value\n");
    for (i, v) in series.values.iter().enumerate() {
        out.push_str(&format!("{},{v:?}\n", i + 1));
    }
    std::fs::write(path, out)
        .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}

/// Convenience: read back the `value` column of an exported series.
pub fn read_series_csv(path: &Path) -> Result<Vec<f64>> {
    ingest_csv(path, &ColumnSel::Name("value".into()), Transform::None)
}
