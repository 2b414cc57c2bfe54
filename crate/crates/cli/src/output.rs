//! File outputs: CSV tables, key-value reports and gnuplot stubs.

use std::fs;
use std::path::{Path, PathBuf};

use spline_spde::matrix_market::write_symmetric;
use spline_spde::sparse::SparseSymMatrix;

use crate::error::CliError;

fn write_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::validation(format!("cannot write {}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| write_error(dir, e))
}

/// Shortest round-trip representation; `NaN` for missing values.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_error(path, e))?;
    w.write_record(header).map_err(|e| write_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| write_error(path, e))
}

/// `key = value` lines in the given order.
pub fn write_report(path: &Path, entries: &[(String, String)]) -> Result<(), CliError> {
    let text: String = entries
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect();
    fs::write(path, text).map_err(|e| write_error(path, e))
}

pub fn write_matrix(path: &Path, m: &SparseSymMatrix) -> Result<(), CliError> {
    fs::write(path, write_symmetric(m)).map_err(|e| write_error(path, e))
}

/// A gnuplot script that maps column `column` of `csv` over x and y.
pub fn write_gnuplot(
    dir: &Path,
    csv: &str,
    column: usize,
    title: &str,
) -> Result<PathBuf, CliError> {
    let stem = csv.trim_end_matches(".csv");
    let path = dir.join(format!("{stem}.gp"));
    let script = format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set view map\n\
         set size ratio -1\n\
         set palette rgbformulae 33,13,10\n\
         set title '{title}'\n\
         splot '{csv}' using 1:2:{column} with points pointtype 5 pointsize 0.5 palette notitle\n"
    );
    fs::write(&path, script).map_err(|e| write_error(&path, e))?;
    Ok(path)
}
