//! Plain-text matrix and histogram formats.
//!
//! Matrices are CSV: one line per row, comma-separated decimals, full matrix.
//! Every number written by this crate carries 12 significant digits.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::transport::Histogram;

/// Formats `x` with 12 significant digits, in the style of C's `%.12g`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    // Rounding to 12 digits may carry into the next decade.
    let sci = format!("{:.11e}", x);
    let (mantissa, e) = sci.split_once('e').expect("exponent present");
    let e: i32 = e.parse().unwrap_or(exp);
    if (-4..12).contains(&e) {
        let decimals = (11 - e).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let mantissa = trim_zeros(mantissa.to_string());
        let sign = if e < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", e.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        t.to_string()
    } else {
        s
    }
}

pub fn write_matrix_csv<W: Write>(mut w: W, a: &Array2<f64>) -> Result<()> {
    for row in a.rows() {
        let line: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn matrix_to_csv(a: &Array2<f64>) -> String {
    let mut buf = Vec::new();
    write_matrix_csv(&mut buf, a).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {lineno}: cannot parse {t:?} as a number")))
        })
        .collect()
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses a full square matrix from CSV text.
pub fn parse_matrix_csv(text: &str) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> =
        content_lines(text).map(|(n, l)| parse_row(l, n)).collect::<Result<_>>()?;
    let d = rows.len();
    if d == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    if let Some((n, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
        return Err(Error::Parse(format!("row {} has {} entries, expected {d}", n + 1, row.len())));
    }
    Ok(Array2::from_shape_fn((d, d), |(i, j)| rows[i][j]))
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    parse_matrix_csv(&std::fs::read_to_string(path)?)
}

/// Parses a single histogram: all numbers in the text, separated by commas,
/// whitespace, or newlines.
pub fn parse_histogram(text: &str) -> Result<Histogram> {
    let mut values = Vec::new();
    for (n, line) in content_lines(text) {
        values.extend(parse_row(line, n)?);
    }
    Histogram::new(values)
}

pub fn read_histogram(path: &Path) -> Result<Histogram> {
    parse_histogram(&std::fs::read_to_string(path)?)
}
