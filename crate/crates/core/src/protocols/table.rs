//! Sweep results: one row per grid point, CSV plus a JSON sidecar.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointError {
    pub index: usize,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResultTable {
    /// Axis columns first, then outputs.
    pub columns: Vec<String>,
    pub axis_columns: usize,
    pub rows: Vec<Vec<f64>>,
    pub errors: Vec<PointError>,
    pub metadata: serde_json::Value,
}

impl ResultTable {
    pub fn new(axes: &[&str], outputs: &[&str]) -> Self {
        let columns = axes.iter().chain(outputs).map(|s| s.to_string()).collect();
        Self { columns, axis_columns: axes.len(), rows: Vec::new(), errors: Vec::new(), metadata: serde_json::Value::Null }
    }

    /// Append a point. A failed point keeps its axis values and gets NaN
    /// outputs.
    pub fn push(&mut self, axes: &[f64], outputs: std::result::Result<Vec<f64>, String>) -> Result<()> {
        if axes.len() != self.axis_columns {
            return Err(Error::InvalidParameter("axis value count does not match the table".into()));
        }
        let n_out = self.columns.len() - self.axis_columns;
        let mut row = axes.to_vec();
        match outputs {
            Ok(v) if v.len() == n_out => row.extend(v),
            Ok(_) => return Err(Error::InvalidParameter("output count does not match the table".into())),
            Err(message) => {
                self.errors.push(PointError { index: self.rows.len(), message });
                row.extend(std::iter::repeat(f64::NAN).take(n_out));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Row with the largest finite value in `name`.
    pub fn argmax(&self, name: &str) -> Option<usize> {
        let col = self.column(name)?;
        col.iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
    }

    /// Write `path` as CSV and `path.json` with columns, errors and metadata.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        let sidecar = path.with_extension("json");
        let meta = serde_json::json!({
            "columns": self.columns,
            "rows": self.rows.len(),
            "errors": self.errors,
            "metadata": self.metadata,
        });
        std::fs::write(&sidecar, serde_json::to_string_pretty(&meta)?)?;
        Ok(sidecar)
    }
}
