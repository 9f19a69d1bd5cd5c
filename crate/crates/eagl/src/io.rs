//! CSV matrices and versioned JSON documents.
//!
//! Matrices are plain numeric CSV, row-major, no header unless asked for.
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! written file reads back bit-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use eagl_core::matrix::SYMMETRY_TOL;
use eagl_core::{Matrix, SymMatrix};
use serde::Serialize;

use crate::error::{CliError, Result};

/// Version stamped into every JSON output.
pub const SCHEMA_VERSION: u32 = 1;

pub fn read_matrix(path: &Path, header: bool) -> Result<Matrix> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_matrix_from(file, header).map_err(|message| CliError::Format { path: path.into(), message })
}

fn read_matrix_from(reader: impl std::io::Read, header: bool) -> std::result::Result<Matrix, String> {
    let mut csv = csv::ReaderBuilder::new().has_headers(header).trim(csv::Trim::All).from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, record) in csv.records().enumerate() {
        let line = k + 1 + usize::from(header);
        let record = record.map_err(|e| format!("line {line}: {e}"))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|_| format!("line {line}, column {}: '{field}' is not a number", j + 1))
            })
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("no data rows".into());
    }
    let m = Matrix::from_rows(&rows).map_err(|e| e.to_string())?;
    m.check_finite().map_err(|e| e.to_string())?;
    Ok(m)
}

/// Square matrix checked for symmetry to `1e-9` and then averaged with its
/// transpose.
pub fn read_sym_matrix(path: &Path, header: bool) -> Result<SymMatrix> {
    let m = read_matrix(path, header)?;
    SymMatrix::from_matrix_with_tol(&m, SYMMETRY_TOL).map_err(|e| CliError::Format { path: path.into(), message: e.to_string() })
}

pub fn write_rows<'a>(path: &Path, header: Option<&[&str]>, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
    let mut out = create(path)?;
    let err = |e| CliError::io(path, e);
    if let Some(h) = header {
        writeln!(out, "{}", h.join(",")).map_err(err)?;
    }
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
        writeln!(out, "{}", line.join(",")).map_err(err)?;
    }
    out.flush().map_err(err)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_rows(path, None, (0..m.rows()).map(|i| m.row(i)))
}

pub fn write_sym_matrix(path: &Path, m: &SymMatrix) -> Result<()> {
    write_rows(path, None, (0..m.dim()).map(|i| m.row(i)))
}

/// CSV of serialisable records with a header row.
pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in records {
        w.serialize(r).map_err(|e| CliError::Format { path: path.into(), message: e.to_string() })?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Serialize)]
struct Versioned<'a, T> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

pub fn to_json<T: Serialize>(body: &T) -> String {
    let doc = Versioned { schema_version: SCHEMA_VERSION, body };
    let mut s = serde_json::to_string_pretty(&doc).expect("serialisable output");
    s.push('\n');
    s
}

/// Writes the versioned document to `path`, or to stdout when `path` is `None`.
pub fn write_json<T: Serialize>(path: Option<&Path>, body: &T) -> Result<()> {
    let text = to_json(body);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        // Drop the sign of negative zero.
        "0".into()
    } else if (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Dense rows of a symmetric matrix, the JSON form of every matrix output.
pub fn sym_rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    (0..m.dim()).map(|i| m.row(i).to_vec()).collect()
}
