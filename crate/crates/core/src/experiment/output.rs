//! CSV plot data with an adjacent JSON schema per file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub description: String,
}

/// One CSV file: named columns and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub description: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, description: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.to_owned(),
            description: description.to_owned(),
            columns: columns
                .iter()
                .map(|(n, d)| Column {
                    name: (*n).to_owned(),
                    description: (*d).to_owned(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Serialize)]
struct Schema<'a> {
    file: String,
    description: &'a str,
    columns: &'a [Column],
    rows: usize,
}

/// Shortest round-trip decimal; non-finite values are spelled out.
fn number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

/// Writes `<name>.csv` and `<name>.schema.json` for every series. Nothing is
/// written if any series is empty.
pub fn emit_plot_data(dir: &Path, series: &[Series]) -> Result<Vec<PathBuf>> {
    if series.is_empty() {
        return Err(Error::InvalidParameter {
            name: "series",
            reason: "no series to write".into(),
        });
    }
    for s in series {
        if s.rows.is_empty() {
            return Err(Error::InvalidParameter {
                name: "series",
                reason: format!("series `{}` has no rows", s.name),
            });
        }
        if s.rows.iter().any(|r| r.len() != s.columns.len()) {
            return Err(Error::InvalidParameter {
                name: "series",
                reason: format!("series `{}` has rows of the wrong width", s.name),
            });
        }
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for s in series {
        let csv_path = dir.join(format!("{}.csv", s.name));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&csv_path)
            .map_err(csv_error)?;
        w.write_record(s.columns.iter().map(|c| c.name.as_str()))
            .map_err(csv_error)?;
        for row in &s.rows {
            w.write_record(row.iter().map(|&v| number(v))).map_err(csv_error)?;
        }
        w.flush()?;

        let schema_path = dir.join(format!("{}.schema.json", s.name));
        let schema = Schema {
            file: format!("{}.csv", s.name),
            description: &s.description,
            columns: &s.columns,
            rows: s.rows.len(),
        };
        let mut text = serde_json::to_string_pretty(&schema).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        fs::write(&schema_path, text)?;
        written.push(csv_path);
        written.push(schema_path);
    }
    Ok(written)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}
