//! Matrix files: headerless CSV or `{"rows", "cols", "data"}` JSON.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    /// RFC 4180, no header, one matrix row per record.
    Csv,
    /// `{"rows": r, "cols": c, "data": [row-major entries]}`.
    MtxJson,
}

impl MatrixFormat {
    /// `.json` files are [`MatrixFormat::MtxJson`], everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => MatrixFormat::MtxJson,
            _ => MatrixFormat::Csv,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(MatrixFormat::Csv),
            "mtxjson" => Ok(MatrixFormat::MtxJson),
            other => Err(format!("unknown matrix format '{other}' (expected csv|mtxjson)")),
        }
    }
}

impl fmt::Display for MatrixFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::MtxJson => "mtxjson",
        })
    }
}

#[derive(Debug, Error)]
pub enum MatrixFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

pub fn read_matrix(path: &Path) -> Result<Matrix, MatrixFileError> {
    read_matrix_as(path, MatrixFormat::from_path(path))
}

pub fn read_matrix_as(path: &Path, format: MatrixFormat) -> Result<Matrix, MatrixFileError> {
    let text = fs::read_to_string(path).map_err(|source| MatrixFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        MatrixFormat::Csv => parse_csv(&text, path),
        MatrixFormat::MtxJson => parse_mtxjson(&text, path),
    }
}

/// Parses CSV text; `origin` only labels error messages.
pub fn parse_csv(text: &str, origin: &Path) -> Result<Matrix, MatrixFileError> {
    let parse_err = |line: u64, column: u64, message: String| MatrixFileError::Parse {
        path: origin.to_path_buf(),
        line,
        column,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut cols = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(parse_err(
                    line,
                    0,
                    format!("expected {c} fields, found {}", record.len()),
                ))
            }
            Some(_) => {}
        }
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(line, i as u64 + 1, format!("not a number: '{field}'")))?;
            if !v.is_finite() {
                return Err(parse_err(line, i as u64 + 1, format!("non-finite value '{field}'")));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| MatrixFileError::Invalid {
        path: origin.to_path_buf(),
        message: "no data rows".into(),
    })?;
    Matrix::from_row_major(rows, cols, data).map_err(|e| MatrixFileError::Invalid {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MtxJson {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub fn parse_mtxjson(text: &str, origin: &Path) -> Result<Matrix, MatrixFileError> {
    let raw: MtxJson = serde_json::from_str(text).map_err(|e| MatrixFileError::Parse {
        path: origin.to_path_buf(),
        line: e.line() as u64,
        column: e.column() as u64,
        message: e.to_string(),
    })?;
    Matrix::from_row_major(raw.rows, raw.cols, raw.data).map_err(|e| MatrixFileError::Invalid {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })
}

/// Renders a matrix; CSV entries carry 17 significant digits.
pub fn format_matrix(m: &Matrix, format: MatrixFormat) -> String {
    match format {
        MatrixFormat::Csv => {
            let mut out = String::new();
            for i in 0..m.rows() {
                let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
            out
        }
        MatrixFormat::MtxJson => {
            let mut s = serde_json::to_string(m).expect("matrices serialize");
            s.push('\n');
            s
        }
    }
}

pub fn write_matrix(path: &Path, m: &Matrix, format: MatrixFormat) -> Result<(), MatrixFileError> {
    fs::write(path, format_matrix(m, format)).map_err(|source| MatrixFileError::Io {
        path: path.to_path_buf(),
        source,
    })
}
