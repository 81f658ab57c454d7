//! JSON and CSV writers for command outputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn to_json_string(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("command results serialize")
}

/// A CSV cell; `None` is written empty.
pub fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes a CSV whose header names every column with its unit.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
