//! Plain CSV formats and `key = value` configuration files.
//!
//! Matrices are written one row per line, comma separated, `\n` terminated,
//! with every float in `{:.16e}` form (17 significant digits) so a
//! write/read cycle reproduces the exact `f64`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{Coefficients, DesignMatrix, ObservationMask, ResponseMatrix};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

/// Raw rows of a CSV file, 1-based file line number attached.
fn read_rows(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        rows.push((line, record.iter().map(str::to_owned).collect()));
    }
    if rows.is_empty() {
        return Err(Error::Parse { row: 1, column: 1, message: "file contains no data".into() });
    }
    Ok(rows)
}

fn check_rectangular(rows: &[(usize, Vec<String>)]) -> Result<usize> {
    let width = rows[0].1.len();
    for (line, cells) in rows {
        if cells.len() != width {
            return Err(Error::Parse {
                row: *line,
                column: cells.len().min(width) + 1,
                message: format!("expected {width} columns, found {}", cells.len()),
            });
        }
    }
    Ok(width)
}

fn parse_number(cell: &str, row: usize, column: usize) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| Error::Parse { row, column, message: format!("{cell:?} is not a number") })?;
    if !v.is_finite() {
        return Err(Error::Parse { row, column, message: format!("{cell:?} is not finite") });
    }
    Ok(v)
}

/// Drops a leading header row: one whose cells are all non-numeric (and not
/// `missing` tokens).
fn strip_header(rows: &mut Vec<(usize, Vec<String>)>, missing: Option<&str>) {
    let is_label = |c: &String| !c.is_empty() && c.parse::<f64>().is_err() && Some(c.as_str()) != missing;
    if rows[0].1.iter().all(is_label) {
        rows.remove(0);
    }
}

pub fn read_design_csv(path: impl AsRef<Path>) -> Result<DesignMatrix> {
    let path = path.as_ref();
    let mut rows = read_rows(path)?;
    strip_header(&mut rows, None);
    if rows.is_empty() {
        return Err(Error::Parse { row: 2, column: 1, message: "no data rows after header".into() });
    }
    let p = check_rectangular(&rows)?;
    let mut data = Vec::with_capacity(rows.len() * p);
    for (line, cells) in &rows {
        for (j, cell) in cells.iter().enumerate() {
            data.push(parse_number(cell, *line, j + 1)?);
        }
    }
    DesignMatrix::from_row_slice(rows.len(), p, &data)
}

/// Rule mapping raw response cells to `±1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseCoding {
    /// Cells must be `-1` or `1`.
    Native,
    /// Cells must be `0` or `1`; `0 → −1`.
    ZeroOne,
    /// Any number; `> threshold → +1`, otherwise `−1`.
    Threshold(f64),
}

/// Reads a response matrix. Empty cells and cells equal to `missing_token`
/// are unobserved.
pub fn read_response_csv(path: impl AsRef<Path>, coding: ResponseCoding, missing_token: &str) -> Result<ResponseMatrix> {
    let path = path.as_ref();
    let mut rows = read_rows(path)?;
    strip_header(&mut rows, Some(missing_token));
    if rows.is_empty() {
        return Err(Error::Parse { row: 2, column: 1, message: "no data rows after header".into() });
    }
    let q = check_rectangular(&rows)?;
    let n = rows.len();
    let mut values = DMatrix::<i8>::zeros(n, q);
    let mut observed = Vec::new();
    for (i, (line, cells)) in rows.iter().enumerate() {
        for (k, cell) in cells.iter().enumerate() {
            if cell.is_empty() || cell == missing_token {
                continue;
            }
            let v = parse_number(cell, *line, k + 1)?;
            let coded = match coding {
                ResponseCoding::Native if v == 1.0 => 1,
                ResponseCoding::Native if v == -1.0 => -1,
                ResponseCoding::ZeroOne if v == 1.0 => 1,
                ResponseCoding::ZeroOne if v == 0.0 => -1,
                ResponseCoding::Threshold(t) => {
                    if v > t {
                        1
                    } else {
                        -1
                    }
                }
                _ => {
                    return Err(Error::Parse {
                        row: *line,
                        column: k + 1,
                        message: format!("{cell:?} violates the {coding:?} response coding"),
                    })
                }
            };
            values[(i, k)] = coded;
            observed.push((i, k));
        }
    }
    let mask = ObservationMask::from_pairs(n, q, observed)?;
    ResponseMatrix::new(values, mask)
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes any matrix row by row with `cell` formatting each entry.
pub fn matrix_to_csv<T, F>(m: &DMatrix<T>, cell: F) -> String
where
    T: nalgebra::Scalar,
    F: Fn(&T) -> String,
{
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| cell(&m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_coefficients(path: impl AsRef<Path>, m: &Coefficients) -> Result<()> {
    write_text(path, &matrix_to_csv(m.values(), |v| format_float(*v)))
}

pub fn read_coefficients(path: impl AsRef<Path>) -> Result<Coefficients> {
    let design = read_design_csv(path)?;
    Coefficients::new(design.values().clone())
}

pub fn write_signs(path: impl AsRef<Path>, signs: &DMatrix<i8>) -> Result<()> {
    write_text(path, &matrix_to_csv(signs, i8::to_string))
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            row: idx + 1,
            column: 1,
            message: format!("expected `key = value`, found {line:?}"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse { row: idx + 1, column: 1, message: "empty key".into() });
        }
        map.insert(key.to_owned(), value.trim().to_owned());
    }
    Ok(map)
}

pub fn read_config(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    parse_config(&fs::read_to_string(path).map_err(|e| io_err(path, e))?)
}

/// Appends a CSV line built from `cells`.
pub(crate) fn push_csv_line(out: &mut String, cells: &[String]) {
    let _ = writeln!(out, "{}", cells.join(","));
}
