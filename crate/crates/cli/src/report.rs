//! Delimited records and the JSON run summary.

use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::CliError;

/// Header plus rows of string cells, written in order.
pub struct Records {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Records {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: Option<&Path>) -> Result<(), CliError> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(std::fs::File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?),
            None => Box::new(std::io::stdout().lock()),
        };
        let mut w = csv::Writer::from_writer(sink);
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// 17 significant digits; a non-finite value is a computational error.
pub fn num(field: &str, x: f64) -> Result<String, CliError> {
    if x.is_finite() {
        Ok(format!("{x:.16e}"))
    } else {
        Err(CliError::Compute(format!("non-finite value in output field {field}: {x}")))
    }
}

/// [`num`] for optional fields; `None` is an empty cell.
pub fn opt_num(field: &str, x: Option<f64>) -> Result<String, CliError> {
    x.map(|v| num(field, v)).transpose().map(Option::unwrap_or_default)
}

pub fn write_summary(path: Option<&Path>, summary: &Value) -> Result<(), CliError> {
    let Some(path) = path else { return Ok(()) };
    let text = serde_json::to_string_pretty(summary).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
