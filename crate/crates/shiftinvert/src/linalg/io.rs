//! Matrix Market (coordinate, real, general) and dense CSV readers.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::matrix::RowMatrix;
use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_matrix_market<P: AsRef<Path>>(path: P) -> Result<RowMatrix> {
    parse_matrix_market(BufReader::new(File::open(path)?))
}

pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<RowMatrix> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file, expected %%MatrixMarket header"))?;
    let header = header?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(parse_err(1, format!("malformed header: {header:?}")));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(parse_err(1, "only 'matrix coordinate' files are supported"));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(parse_err(1, format!("unsupported field type {:?}", tokens[3])));
    }
    if tokens[4] != "general" {
        return Err(parse_err(1, format!("unsupported symmetry {:?}", tokens[4])));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut seen = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "size line needs 'rows cols entries'"));
                }
                let p = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| parse_err(lineno, format!("bad integer {s:?}")))
                };
                let (n, d, nnz) = (p(fields[0])?, p(fields[1])?, p(fields[2])?);
                rows = vec![Vec::new(); n];
                size = Some((n, d, nnz));
            }
            Some((n, d, nnz)) => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "entry line needs 'row col value'"));
                }
                if seen == nnz {
                    return Err(parse_err(lineno, format!("more than {nnz} entries")));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad row index {:?}", fields[0])))?;
                let j: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad column index {:?}", fields[1])))?;
                if i == 0 || i > n || j == 0 || j > d {
                    return Err(parse_err(
                        lineno,
                        format!("entry ({i}, {j}) outside {n}x{d}"),
                    ));
                }
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad value {:?}", fields[2])))?;
                if !v.is_finite() {
                    return Err(parse_err(
                        lineno,
                        format!("non-finite value at row {i}, column {j}"),
                    ));
                }
                rows[i - 1].push((j - 1, v));
                seen += 1;
            }
        }
    }
    let (_, d, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    if seen != nnz {
        return Err(parse_err(0, format!("expected {nnz} entries, found {seen}")));
    }
    RowMatrix::from_sparse_rows(d, rows)
}

pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<RowMatrix> {
    parse_csv(BufReader::new(File::open(path)?))
}

/// One dense row per line, comma separated. Blank lines and lines starting
/// with `#` are skipped.
pub fn parse_csv<R: BufRead>(reader: R) -> Result<RowMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut d: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        match parse_csv_line(&line, lineno, rows.len())? {
            None => continue,
            Some(row) => {
                match d {
                    None => d = Some(row.len()),
                    Some(d) if d != row.len() => {
                        return Err(parse_err(
                            lineno,
                            format!("expected {d} columns, found {}", row.len()),
                        ))
                    }
                    _ => {}
                }
                rows.push(row);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("CSV input has no rows".into()));
    }
    RowMatrix::from_dense_rows(&rows)
}

/// Parses one CSV record; `Ok(None)` for blank or comment lines.
pub(crate) fn parse_csv_line(line: &str, lineno: usize, row: usize) -> Result<Option<Vec<f64>>> {
    let t = line.trim();
    if t.is_empty() || t.starts_with('#') {
        return Ok(None);
    }
    let mut out = Vec::new();
    for (col, field) in t.split(',').enumerate() {
        let f = field.trim();
        let v: f64 = f.parse().map_err(|_| {
            parse_err(lineno, format!("bad number {f:?} at row {row}, column {col}"))
        })?;
        if !v.is_finite() {
            return Err(parse_err(
                lineno,
                format!("non-finite value at row {row}, column {col}"),
            ));
        }
        out.push(v);
    }
    Ok(Some(out))
}
