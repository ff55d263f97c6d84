//! Number and table formatting for the reports.

use std::io::Write;

use hpds_core::linalg::Matrix;

use crate::error::CliError;

/// Shortest decimal string that reads back as `x` rounded to twelve
/// significant digits; exponent notation outside `[1e-5, 1e15)`.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let mag = rounded.abs();
    if mag != 0.0 && !(1e-5..1e15).contains(&mag) {
        format!("{rounded:e}")
    } else {
        rounded.to_string()
    }
}

/// Matrix as a list of rows.
pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Matrix as a list of its columns.
pub fn columns(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.ncols()).map(|j| m.column(j).iter().copied().collect()).collect()
}

/// 0-based mode indices as the 1-based ones used in reports.
pub fn one_based(modes: &[usize]) -> Vec<usize> {
    modes.iter().map(|m| m + 1).collect()
}

/// Writes a CSV table with a header row; `None` cells stay empty.
pub fn write_csv<W: Write>(out: W, header: &[String], rows: &[Vec<Option<f64>>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|c| c.map(sig12).unwrap_or_default()))?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))
}

/// `t, x_1, ..., x_n` followed by `prefix_1, ...` for each extra block.
pub fn state_header(n: usize, blocks: &[&str]) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for block in blocks {
        h.extend((1..=n).map(|i| format!("{block}_{i}")));
    }
    h
}
