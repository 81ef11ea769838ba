//! Plain-text matrix, vector and series files.
//!
//! Matrices are `n` lines of `n` comma-separated values; vectors and spectra
//! hold one value per line. Every write goes to a sibling temporary file
//! that is renamed into place, so readers never observe a partial file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rmt::validate_symmetric;
use crate::spectrum::DiscreteSpectrum;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_value(path: &Path, line: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("`{}` is not a number", s.trim())))
}

/// Reads a square matrix and checks it is finite and symmetric.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Mat<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, l) in data_lines(&text) {
        let row = l
            .split(',')
            .map(|c| parse_value(path, line, c))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(parse_err(path, 1, "no data rows"));
    }
    if rows[0].len() != n {
        return Err(parse_err(
            path,
            1,
            format!("matrix must be square: {n} rows of {} columns", rows[0].len()),
        ));
    }
    let m = Mat::from_fn(n, n, |i, j| rows[i][j]);
    validate_symmetric(&m)?;
    Ok(m)
}

/// Reads one value per line.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let v = data_lines(&text)
        .map(|(line, l)| parse_value(path, line, l))
        .collect::<Result<Vec<f64>>>()?;
    if v.is_empty() {
        return Err(parse_err(path, 1, "no values"));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("value {} in {}", i + 1, path.display())));
    }
    Ok(v)
}

pub fn read_spectrum(path: impl AsRef<Path>) -> Result<DiscreteSpectrum> {
    DiscreteSpectrum::new(read_vector(path)?)
}

fn tmp_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}

/// Writes `contents` via a temporary file and a rename.
pub fn write_atomic(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = tmp_path(path);
    fs::write(&tmp, contents)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

pub fn write_matrix(path: impl AsRef<Path>, m: &Mat<f64>) -> Result<()> {
    let mut s = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                s.push(',');
            }
            write!(s, "{}", m[(i, j)]).unwrap();
        }
        s.push('\n');
    }
    write_atomic(path, &s)
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    let mut s = String::new();
    for x in v {
        writeln!(s, "{x}").unwrap();
    }
    write_atomic(path, &s)
}

/// One CSV column: a header and its cells.
pub enum Column {
    Real(&'static str, Vec<f64>),
    Int(&'static str, Vec<i64>),
    Text(&'static str, Vec<String>),
}

impl Column {
    fn header(&self) -> &str {
        match self {
            Column::Real(h, _) | Column::Int(h, _) | Column::Text(h, _) => h,
        }
    }

    fn len(&self) -> usize {
        match self {
            Column::Real(_, v) => v.len(),
            Column::Int(_, v) => v.len(),
            Column::Text(_, v) => v.len(),
        }
    }

    fn cell(&self, i: usize, out: &mut String) {
        match self {
            Column::Real(_, v) => write!(out, "{}", v[i]).unwrap(),
            Column::Int(_, v) => write!(out, "{}", v[i]).unwrap(),
            Column::Text(_, v) => out.push_str(&v[i]),
        }
    }
}

/// CSV with a header row; all columns must have the same length.
pub fn series_csv(columns: &[Column]) -> Result<String> {
    let len = columns.first().map_or(0, Column::len);
    if let Some(c) = columns.iter().find(|c| c.len() != len) {
        return Err(Error::DimensionMismatch {
            expected: len,
            found: c.len(),
        });
    }
    let mut s = columns.iter().map(Column::header).collect::<Vec<_>>().join(",");
    s.push('\n');
    for i in 0..len {
        for (k, c) in columns.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            c.cell(i, &mut s);
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn write_series(path: impl AsRef<Path>, columns: &[Column]) -> Result<()> {
    write_atomic(path, &series_csv(columns)?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, &s)
}
