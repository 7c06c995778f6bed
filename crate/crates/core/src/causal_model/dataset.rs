use std::io::{Read, Write};
use std::path::Path;

use crate::error::{RcaError, Result};

use super::Dag;

/// Row-major table of finite reals with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    /// Rows dropped at load time because a required value was missing.
    dropped_rows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(RcaError::SchemaError(format!(
                    "row {i} has {} values, expected {}",
                    row.len(),
                    columns.len()
                )));
            }
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(RcaError::InvalidInput(format!("row {i} contains non-finite value {bad}")));
            }
        }
        Ok(Dataset { columns, rows, dropped_rows: 0 })
    }

    /// Reads a CSV with a header row. Only `required` columns (all columns if
    /// `None`) are parsed and kept; rows with an empty or `NA`/`NaN` value in
    /// any of them are dropped.
    pub fn from_csv_reader<R: Read>(reader: R, required: Option<&[String]>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let columns: Vec<String> = match required {
            Some(req) => req.to_vec(),
            None => header.clone(),
        };
        let positions = columns
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| RcaError::SchemaError(format!("column '{c}' missing from CSV header")))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut rows = Vec::new();
        let mut dropped_rows = 0;
        'records: for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(positions.len());
            for (&pos, col) in positions.iter().zip(&columns) {
                let field = record.get(pos).unwrap_or("");
                if is_missing(field) {
                    dropped_rows += 1;
                    continue 'records;
                }
                let v: f64 = field.parse().map_err(|_| {
                    RcaError::SchemaError(format!(
                        "column '{col}', data row {}: cannot parse '{field}' as a number",
                        line + 1
                    ))
                })?;
                if !v.is_finite() {
                    dropped_rows += 1;
                    continue 'records;
                }
                row.push(v);
            }
            rows.push(row);
        }
        Ok(Dataset { columns, rows, dropped_rows })
    }

    pub fn from_csv_path(path: impl AsRef<Path>, required: Option<&[String]>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(std::io::BufReader::new(file), required)
    }

    /// Writes the table as CSV, floats at 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_f64(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| RcaError::SchemaError(format!("column '{name}' missing from dataset")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Reorders columns to DAG node order, dropping extra columns.
    pub fn aligned_to(&self, dag: &Dag) -> Result<Dataset> {
        let idx = dag
            .names()
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            columns: dag.names().to_vec(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect(),
            dropped_rows: self.dropped_rows,
        })
    }

    /// Rows `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            rows: self.rows[range].to_vec(),
            dropped_rows: 0,
        }
    }
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("na") || field.eq_ignore_ascii_case("nan")
}

/// Formats a float with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.16e}")
}
