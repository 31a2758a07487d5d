//! Column tables written as CSV or JSON with round-trip exact numbers.
//!
//! Every value is printed with 17 significant digits, which is enough to
//! recover the original `f64` bit for bit. Files are written to a temporary
//! sibling and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("row {row} has {got} values, expected {expected}")]
    Shape { row: usize, got: usize, expected: usize },
    #[error("row {row}, column {column}: cannot parse {text:?} as a number")]
    Parse { row: usize, column: String, text: String },
    #[error("json table is missing field {0:?}")]
    MissingField(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// JSON for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// Named columns of `f64` values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// 17 significant digits in scientific notation.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Table {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format_number(*x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// `{"columns": [...], "rows": [[...], ...]}`; non-finite values become null.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\"columns\":");
        out.push_str(&serde_json::to_string(&self.columns).expect("strings serialize"));
        out.push_str(",\"rows\":[");
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push('[');
            for (j, x) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                if x.is_finite() {
                    out.push_str(&format_number(*x));
                } else {
                    out.push_str("null");
                }
            }
            out.push(']');
        }
        out.push_str("]}\n");
        out
    }

    pub fn from_csv(text: &str) -> Result<Table, ExportError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut table = Table { columns, rows: Vec::new() };
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != table.columns.len() {
                return Err(ExportError::Shape {
                    row,
                    got: record.len(),
                    expected: table.columns.len(),
                });
            }
            let mut values = Vec::with_capacity(record.len());
            for (j, text) in record.iter().enumerate() {
                let x = text.parse::<f64>().map_err(|_| ExportError::Parse {
                    row,
                    column: table.columns[j].clone(),
                    text: text.to_string(),
                })?;
                values.push(x);
            }
            table.rows.push(values);
        }
        Ok(table)
    }

    pub fn from_json(text: &str) -> Result<Table, ExportError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let columns: Vec<String> = serde_json::from_value(
            value.get("columns").cloned().ok_or(ExportError::MissingField("columns"))?,
        )?;
        let raw: Vec<Vec<Option<f64>>> = serde_json::from_value(
            value.get("rows").cloned().ok_or(ExportError::MissingField("rows"))?,
        )?;
        let mut rows = Vec::with_capacity(raw.len());
        for (row, r) in raw.into_iter().enumerate() {
            if r.len() != columns.len() {
                return Err(ExportError::Shape { row, got: r.len(), expected: columns.len() });
            }
            rows.push(r.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect());
        }
        Ok(Table { columns, rows })
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// Write atomically, choosing the format from the extension.
    pub fn write(&self, path: &Path) -> Result<(), ExportError> {
        write_atomic(path, self.render(Format::from_path(path)).as_bytes())
    }

    pub fn read(path: &Path) -> Result<Table, ExportError> {
        let text = fs::read_to_string(path)
            .map_err(|source| ExportError::Io { path: path.to_path_buf(), source })?;
        match Format::from_path(path) {
            Format::Csv => Table::from_csv(&text),
            Format::Json => Table::from_json(&text),
        }
    }
}

/// Write to `<path>.tmp-<pid>` and rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ExportError> {
    let io_err = |source| ExportError::Io { path: path.to_path_buf(), source };
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    let mut suffix = String::new();
    let _ = write!(suffix, ".tmp-{}", std::process::id());
    tmp_name.push(suffix);
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(e)
    })
}
