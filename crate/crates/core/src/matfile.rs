//! Plain-text matrix, embedding-batch and label files.
//!
//! Lines starting with `#` and blank lines are ignored everywhere. A matrix
//! file starts with `rows cols`; a batch file with `n d tau`, followed by
//! the `n` image rows and then the `n` text rows. Label files hold one
//! class index per line.

use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::hnnce::EmbeddingBatch;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

struct Lines {
    inner: Vec<(usize, String)>,
    pos: usize,
}

impl Lines {
    fn read(reader: impl BufRead) -> Result<Self> {
        let mut inner = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                inner.push((i + 1, t.to_string()));
            }
        }
        Ok(Self { inner, pos: 0 })
    }

    fn next(&mut self, what: &str) -> Result<(usize, &str)> {
        let (no, line) = self.inner.get(self.pos).ok_or_else(|| Error::InvalidInput(format!("unexpected end of file: expected {what}")))?;
        self.pos += 1;
        Ok((*no, line))
    }

    fn finish(&self) -> Result<()> {
        match self.inner.get(self.pos) {
            Some((no, _)) => Err(Error::InvalidInput(format!("line {no}: unexpected trailing data"))),
            None => Ok(()),
        }
    }
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("line {line}: {msg}"))
}

fn parse_row<T: Scalar>(no: usize, line: &str, cols: usize) -> Result<Vec<T>> {
    let row = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .and_then(T::from_f64)
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(no, format!("'{tok}' is not a finite number")))
        })
        .collect::<Result<Vec<T>>>()?;
    if row.len() != cols {
        return Err(parse_err(no, format!("expected {cols} values, found {}", row.len())));
    }
    Ok(row)
}

fn parse_usize(no: usize, tok: &str) -> Result<usize> {
    tok.parse().map_err(|_| parse_err(no, format!("'{tok}' is not a non-negative integer")))
}

fn read_rows<T: Scalar>(lines: &mut Lines, rows: usize, cols: usize) -> Result<Matrix<T>> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let (no, line) = lines.next("matrix row")?;
        data.extend(parse_row::<T>(no, line, cols)?);
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn read_matrix<T: Scalar>(reader: impl BufRead) -> Result<Matrix<T>> {
    let mut lines = Lines::read(reader)?;
    let (no, header) = lines.next("'rows cols' header")?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_err(no, "header must be 'rows cols'"));
    }
    let (rows, cols) = (parse_usize(no, dims[0])?, parse_usize(no, dims[1])?);
    let m = read_rows(&mut lines, rows, cols)?;
    lines.finish()?;
    Ok(m)
}

pub fn write_matrix<T: Scalar>(m: &Matrix<T>) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    write_rows(&mut out, m);
    out
}

fn write_rows<T: Scalar>(out: &mut String, m: &Matrix<T>) {
    for row in m.iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| v.as_f64().to_string()).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
}

/// Reads a batch; rows must already be unit norm.
pub fn read_batch<T: Scalar>(reader: impl BufRead) -> Result<EmbeddingBatch<T>> {
    let mut lines = Lines::read(reader)?;
    let (no, header) = lines.next("'n d tau' header")?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(parse_err(no, "header must be 'n d tau'"));
    }
    let (n, d) = (parse_usize(no, parts[0])?, parse_usize(no, parts[1])?);
    let tau = parse_row::<T>(no, parts[2], 1)?[0];
    let x = read_rows(&mut lines, n, d)?;
    let t = read_rows(&mut lines, n, d)?;
    lines.finish()?;
    EmbeddingBatch::new(x, t, tau)
}

pub fn write_batch<T: Scalar>(batch: &EmbeddingBatch<T>) -> String {
    let mut out = format!("{} {} {}\n", batch.n(), batch.dim(), batch.tau().as_f64());
    write_rows(&mut out, batch.x());
    write_rows(&mut out, batch.t());
    out
}

pub fn read_labels(reader: impl BufRead) -> Result<Vec<usize>> {
    let lines = Lines::read(reader)?;
    lines.inner.iter().map(|(no, l)| parse_usize(*no, l)).collect()
}

pub fn write_labels(labels: &[usize]) -> String {
    labels.iter().map(|y| format!("{y}\n")).collect()
}
