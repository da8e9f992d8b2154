//! File formats.
//!
//! **Parameter file** (JSON):
//!
//! ```json
//! {"K": 2, "m": 2,
//!  "alpha": [0.5, 0.5],
//!  "mu": [[1.0, 1.0], [-1.0, -1.0]],
//!  "sigma": [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]]}
//! ```
//!
//! `mu` holds `K` vectors of length `m`; `sigma` holds `K` matrices, each
//! listed row by row (`sigma[j][a][b]` is entry `(a, b)` of `Sigma_j`).
//!
//! **Dataset file** (CSV): one sample per row, `m` numeric columns, no
//! header unless the reader is told to skip one.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::gmm::{Dataset, GmmParams};
use crate::{GemError, Result};

/// Serde mirror of the parameter file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub m: usize,
    pub alpha: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<Vec<f64>>>,
}

impl From<&GmmParams> for ParamsFile {
    fn from(p: &GmmParams) -> Self {
        let m = p.dim();
        Self {
            k: p.k(),
            m,
            alpha: p.alpha().iter().copied().collect(),
            mu: p.means().iter().map(|v| v.iter().copied().collect()).collect(),
            sigma: p
                .covariances()
                .iter()
                .map(|s| (0..m).map(|a| (0..m).map(|b| s[(a, b)]).collect()).collect())
                .collect(),
        }
    }
}

impl TryFrom<&ParamsFile> for GmmParams {
    type Error = GemError;

    fn try_from(f: &ParamsFile) -> Result<Self> {
        let (k, m) = (f.k, f.m);
        if f.alpha.len() != k || f.mu.len() != k || f.sigma.len() != k {
            return Err(GemError::DimensionMismatch(format!(
                "K = {k} but alpha/mu/sigma have {}/{}/{} entries",
                f.alpha.len(),
                f.mu.len(),
                f.sigma.len()
            )));
        }
        let mut sigma = Vec::with_capacity(k);
        for (j, rows) in f.sigma.iter().enumerate() {
            if f.mu[j].len() != m || rows.len() != m || rows.iter().any(|r| r.len() != m) {
                return Err(GemError::DimensionMismatch(format!(
                    "component {j} does not match m = {m}"
                )));
            }
            sigma.push(DMatrix::from_fn(m, m, |a, b| rows[a][b]));
        }
        GmmParams::new(
            DVector::from_column_slice(&f.alpha),
            f.mu.iter().map(|v| DVector::from_column_slice(v)).collect(),
            sigma,
        )
    }
}

fn io_err(path: &Path, err: impl std::fmt::Display) -> GemError {
    GemError::Io {
        path: path.display().to_string(),
        reason: err.to_string(),
    }
}

pub fn params_to_json(p: &GmmParams) -> String {
    serde_json::to_string_pretty(&ParamsFile::from(p)).expect("plain data serializes")
}

pub fn params_from_json(text: &str) -> Result<GmmParams> {
    let file: ParamsFile =
        serde_json::from_str(text).map_err(|e| GemError::Format(e.to_string()))?;
    GmmParams::try_from(&file)
}

pub fn read_params(path: impl AsRef<Path>) -> Result<GmmParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    params_from_json(&text)
}

pub fn write_params(path: impl AsRef<Path>, p: &GmmParams) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, params_to_json(p) + "\n").map_err(|e| io_err(path, e))
}

/// Parses CSV rows of numbers. With `has_header` the first record is skipped.
pub fn parse_dataset_csv<R: Read>(reader: R, has_header: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut m = None;
    let mut values = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| GemError::Format(e.to_string()))?;
        match m {
            None => m = Some(record.len()),
            Some(width) if width != record.len() => {
                return Err(GemError::Format(format!(
                    "row {line} has {} columns, expected {width}",
                    record.len()
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| {
                GemError::Format(format!("row {line}: cannot parse {field:?} as a number"))
            })?;
            values.push(v);
        }
    }
    Dataset::from_row_major(m.unwrap_or(0), values)
}

pub fn read_dataset_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    parse_dataset_csv(file, has_header).map_err(|e| match e {
        GemError::Format(reason) => GemError::Io {
            path: path.display().to_string(),
            reason,
        },
        other => other,
    })
}

/// Writes one sample per line using the shortest round-trip float formatting.
pub fn write_dataset_csv<W: Write>(mut writer: W, data: &Dataset) -> std::io::Result<()> {
    for row in data.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(writer, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn save_dataset_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_dataset_csv(&mut w, data).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}
