//! Field snapshot files.
//!
//! A container is a sequence of records. Each record is a one-line JSON
//! header followed by the node values as little-endian `f64` in storage
//! order (axis 0 fastest). A space-time path stores one record per time
//! slice; observables add a `field` name to each header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ac_action::{Boundary, Grid, ScalarField, SpaceTimePath};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub counts: Vec<usize>,
    pub bc: Boundary,
    pub time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl SnapshotHeader {
    pub fn new(grid: &Grid, time: f64, field: Option<&str>) -> Self {
        SnapshotHeader {
            dim: grid.dim(),
            extents: grid.extents().to_vec(),
            counts: grid.counts().to_vec(),
            bc: grid.bc(),
            time,
            origin: Some(grid.origin().to_vec()),
            field: field.map(str::to_owned),
        }
    }

    pub fn grid(&self) -> CliResult<Grid> {
        if self.extents.len() != self.dim || self.counts.len() != self.dim {
            return Err(CliError::config("snapshot header: dim does not match extents/counts"));
        }
        let origin = self.origin.clone().unwrap_or_else(|| vec![0.0; self.dim]);
        Ok(Grid::new(&origin, &self.extents, &self.counts, self.bc)?)
    }

    fn node_count(&self) -> usize {
        self.counts.iter().product()
    }
}

/// One header plus its values.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub header: SnapshotHeader,
    pub values: Vec<f64>,
}

pub fn write_record(w: &mut impl Write, header: &SnapshotHeader, values: &[f64]) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(8 * values.len());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

/// Reads records until end of input.
pub fn read_records(r: &mut impl BufRead) -> CliResult<Vec<Record>> {
    let mut out = Vec::new();
    loop {
        let mut line = Vec::new();
        let read = r
            .read_until(b'\n', &mut line)
            .map_err(|e| CliError::config(format!("snapshot container: {e}")))?;
        if read == 0 {
            break;
        }
        let index = out.len();
        let header: SnapshotHeader = serde_json::from_slice(&line)
            .map_err(|e| CliError::config(format!("snapshot container record {index}: bad header: {e}")))?;
        let mut bytes = vec![0u8; 8 * header.node_count()];
        r.read_exact(&mut bytes)
            .map_err(|_| CliError::config(format!("snapshot container record {index}: truncated values")))?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8 bytes")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::config(format!(
                "snapshot container record {index}: non-finite value"
            )));
        }
        out.push(Record { header, values });
    }
    Ok(out)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

pub fn write_path(path: &Path, p: &SpaceTimePath) -> CliResult<()> {
    let mut w = create(path)?;
    for (m, &t) in p.times().iter().enumerate() {
        write_record(&mut w, &SnapshotHeader::new(p.grid(), t, None), p.snapshot(m))
            .map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes named fields; each entry is `(time, field name, values)`.
pub fn write_fields<'a>(
    path: &Path,
    grid: &Grid,
    fields: impl IntoIterator<Item = (f64, &'a str, &'a [f64])>,
) -> CliResult<()> {
    let mut w = create(path)?;
    for (t, name, values) in fields {
        write_record(&mut w, &SnapshotHeader::new(grid, t, Some(name)), values).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> CliResult<Vec<Record>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_records(&mut BufReader::new(file)).map_err(|e| match e {
        CliError::Config(msg) => CliError::config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Reads a space-time path: unnamed records on a common grid with
/// increasing times.
pub fn read_path(path: &Path) -> CliResult<SpaceTimePath> {
    let records = read_file(path)?;
    let first = records
        .first()
        .ok_or_else(|| CliError::config(format!("{}: empty container", path.display())))?;
    let grid = first.header.grid()?;
    let mut times = Vec::with_capacity(records.len());
    let mut values = Vec::with_capacity(records.len() * grid.len());
    for rec in &records {
        if rec.header.grid()? != grid || rec.header.field.is_some() {
            return Err(CliError::config(format!(
                "{}: records must share one grid and carry no field name",
                path.display()
            )));
        }
        times.push(rec.header.time);
        values.extend_from_slice(&rec.values);
    }
    SpaceTimePath::new(grid, times, values).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Node coordinates and value per row.
pub fn write_field_csv(path: &Path, u: &ScalarField) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let grid = u.grid();
    if grid.dim() == 1 {
        w.write_record(["x [length]", "u [1]"])?;
    } else {
        w.write_record(["x [length]", "y [length]", "u [1]"])?;
    }
    for (k, v) in u.values().iter().enumerate() {
        let [x, y] = grid.coords(k);
        if grid.dim() == 1 {
            w.write_record([x.to_string(), v.to_string()])?;
        } else {
            w.write_record([x.to_string(), y.to_string(), v.to_string()])?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
