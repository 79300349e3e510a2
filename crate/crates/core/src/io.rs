//! Plain-text matrix files and dataset CSVs.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::Dataset;

fn read_to_string(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.display().to_string()));
    }
    Ok(std::fs::read_to_string(path)?)
}

/// Row-major, whitespace separated, one row per line, shortest round-trip decimals.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse { line: k + 1, message: format!("not a number: {t:?}") })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: k + 1,
                    message: format!("expected {} entries, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 0, message: "empty matrix".into() });
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&read_to_string(path)?)
}

/// Reads a headed CSV whose `response` column is `y` and whose remaining
/// columns form the design, in file order.
pub fn read_dataset(path: &Path, response: &str) -> Result<(Dataset, Vec<String>)> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_owned)
        .collect();
    let y_col = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::Parse { line: 1, message: format!("no column named {response:?}") })?;
    let names: Vec<String> = headers.iter().enumerate().filter(|(i, _)| *i != y_col).map(|(_, h)| h.clone()).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if rec.len() != headers.len() {
            return Err(Error::Parse { line, message: format!("expected {} fields", headers.len()) });
        }
        for (i, field) in rec.iter().enumerate() {
            let v: f64 =
                field.parse().map_err(|_| Error::Parse { line, message: format!("not a number: {field:?}") })?;
            if i == y_col {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let n = ys.len();
    let p = names.len();
    let design = DMatrix::from_row_slice(n, p, &xs);
    Ok((Dataset::new(design, DVector::from_vec(ys))?, names))
}
