//! Plain-text matrix format: a `rows cols` header line, then one line per
//! row with entries at 17 significant digits separated by single spaces.

use super::mat::Mat;
use crate::error::{Error, Result};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn write_matrix(m: &Mat) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses one matrix from the front of `lines`, consuming exactly its lines.
pub fn read_matrix_lines<'a, I>(lines: &mut I) -> Result<Mat>
where
    I: Iterator<Item = &'a str>,
{
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("missing matrix header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header needs two integers: {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("missing row {r}")))?;
        let before = data.len();
        for tok in line.split(' ').filter(|t| !t.is_empty()) {
            data.push(
                tok.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {r}: {tok:?}: {e}")))?,
            );
        }
        if data.len() - before != cols {
            return Err(Error::Parse(format!(
                "row {r} has {} entries, expected {cols}",
                data.len() - before
            )));
        }
    }
    Mat::from_vec(rows, cols, data)
}

pub fn read_matrix(text: &str) -> Result<Mat> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let m = read_matrix_lines(&mut lines)?;
    if lines.next().is_some() {
        return Err(Error::Parse("trailing content after matrix".into()));
    }
    Ok(m)
}
