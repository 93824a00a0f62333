//! CSV ingestion of price or return series.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use fishseg::{log_returns, ReturnSeries};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    /// Prices, converted to log-returns.
    Price,
    /// Returns, used as-is.
    Return,
}

/// A column selected by zero-based position or by header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: PathBuf,
    pub format: InputFormat,
    /// Defaults to the last column.
    pub value_col: Option<ColumnRef>,
    /// Defaults to the first column when there are at least two and it is
    /// not the value column. `Name("none")` disables labels.
    pub label_col: Option<ColumnRef>,
}

/// Parsed rows before conversion: values, labels and their source lines.
#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub values: Vec<f64>,
    pub labels: Option<Vec<String>>,
    pub lines: Vec<u64>,
}

fn resolve(col: &ColumnRef, header: Option<&[String]>, path: &Path) -> Result<usize, CliError> {
    match col {
        ColumnRef::Index(i) => Ok(*i),
        ColumnRef::Name(name) => header
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| CliError::Input(format!("{}: no column named {name:?}", path.display()))),
    }
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

pub fn read_column(spec: &InputSpec) -> Result<RawColumn, CliError> {
    let path = &spec.path;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;

    let mut rows: Vec<(u64, Vec<String>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    let Some((_, first)) = rows.first() else {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    };
    let width = first.len();

    // a first row whose value field is not numeric is a header
    let default_value = ColumnRef::Index(width - 1);
    let value_ref = spec.value_col.as_ref().unwrap_or(&default_value);
    let header: Option<Vec<String>> = match value_ref {
        ColumnRef::Name(_) => Some(first.clone()),
        ColumnRef::Index(i) => match first.get(*i) {
            Some(f) if parse_number(f).is_some() => None,
            _ => Some(first.clone()),
        },
    };
    let value_col = resolve(value_ref, header.as_deref(), path)?;
    let label_col = match &spec.label_col {
        Some(ColumnRef::Name(n)) if n == "none" => None,
        Some(c) => Some(resolve(c, header.as_deref(), path)?),
        None if width >= 2 && value_col != 0 => Some(0),
        None => None,
    };

    let data = if header.is_some() { &rows[1..] } else { &rows[..] };
    if data.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    let mut values = Vec::with_capacity(data.len());
    let mut labels = label_col.map(|_| Vec::with_capacity(data.len()));
    let mut lines = Vec::with_capacity(data.len());
    for (line, fields) in data {
        let field = fields.get(value_col).ok_or_else(|| {
            CliError::Input(format!("{}:{line}: missing column {value_col}", path.display()))
        })?;
        let v = parse_number(field)
            .filter(|v| v.is_finite())
            .ok_or_else(|| CliError::Input(format!("{}:{line}: cannot parse {field:?} as a number", path.display())))?;
        values.push(v);
        lines.push(*line);
        if let (Some(col), Some(labels)) = (label_col, labels.as_mut()) {
            let l = fields.get(col).ok_or_else(|| {
                CliError::Input(format!("{}:{line}: missing label column {col}", path.display()))
            })?;
            labels.push(l.clone());
        }
    }
    Ok(RawColumn { values, labels, lines })
}

/// Reads the input and converts it to a return series.
pub fn ingest(spec: &InputSpec) -> Result<ReturnSeries, CliError> {
    let raw = read_column(spec)?;
    let path = spec.path.display();
    let series = match spec.format {
        InputFormat::Price => {
            if let Some(i) = raw.values.iter().position(|&p| p <= 0.0) {
                return Err(CliError::Input(format!(
                    "{path}:{}: non-positive price {}",
                    raw.lines[i], raw.values[i]
                )));
            }
            log_returns(&raw.values, raw.labels.as_deref())
        }
        InputFormat::Return => match raw.labels {
            Some(l) => ReturnSeries::with_labels(raw.values, l),
            None => ReturnSeries::new(raw.values),
        },
    };
    series.map_err(|e| CliError::Input(format!("{path}: {e}")))
}

/// Prices aligned with the return series: the input prices themselves, or
/// for return input the compounded path starting at 1.
pub fn price_path(spec: &InputSpec, series: &ReturnSeries) -> Result<Vec<f64>, CliError> {
    match spec.format {
        InputFormat::Price => Ok(read_column(spec)?.values),
        InputFormat::Return => {
            let mut p = Vec::with_capacity(series.len() + 1);
            let mut level = 0.0f64;
            p.push(1.0);
            for r in series.values() {
                level += r;
                p.push(level.exp());
            }
            Ok(p)
        }
    }
}
