//! MatrixMarket coordinate files (`real`, `general` or `symmetric`).
//!
//! Values are written with 17 significant digits so a reload reproduces every
//! entry bit for bit. Indices are 1-based; symmetric files list the lower
//! triangle only.

use std::fmt::Write as _;

use thiserror::Error;

use crate::sparse::{CsrMatrix, SparseSymMatrix};

#[derive(Debug, Error)]
pub enum MatrixMarketError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("expected a {expected} matrix, file declares {found}")]
    Symmetry {
        expected: &'static str,
        found: &'static str,
    },
}

pub fn write_symmetric(m: &SparseSymMatrix) -> String {
    let mut out = String::with_capacity(48 * (m.nnz_lower() + 2));
    out.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(out, "{} {} {}", m.n(), m.n(), m.nnz_lower());
    for (i, j, v) in m.iter_lower() {
        let _ = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v);
    }
    out
}

pub fn write_general(m: &CsrMatrix) -> String {
    let mut out = String::with_capacity(48 * (m.nnz() + 2));
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", m.rows(), m.cols(), m.nnz());
    for (i, j, v) in m.iter() {
        let _ = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v);
    }
    out
}

struct Parsed {
    symmetric: bool,
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

fn parse(text: &str) -> Result<Parsed, MatrixMarketError> {
    let err = |line: usize, message: &str| MatrixMarketError::Parse {
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let tok: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tok.len() != 5 || tok[0] != "%%matrixmarket" || tok[1] != "matrix" {
        return Err(err(
            1,
            "header must read %%MatrixMarket matrix coordinate real <symmetry>",
        ));
    }
    if tok[2] != "coordinate" {
        return Err(err(1, "only the coordinate format is supported"));
    }
    if tok[3] != "real" && tok[3] != "integer" {
        return Err(err(1, "only real or integer fields are supported"));
    }
    let symmetric = match tok[4].as_str() {
        "general" => false,
        "symmetric" => true,
        _ => return Err(err(1, "symmetry must be general or symmetric")),
    };

    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (sl, size) = body.next().ok_or_else(|| err(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(sl, "cannot parse size line")))
        .collect::<Result<_, _>>()?;
    if dims.len() != 3 {
        return Err(err(sl, "size line must hold rows, columns and entry count"));
    }
    let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
    if symmetric && rows != cols {
        return Err(err(sl, "symmetric matrix must be square"));
    }
    let mut entries = Vec::with_capacity(nnz);
    for (ln, l) in body {
        if entries.len() == nnz {
            return Err(err(ln, "more entries than declared"));
        }
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 {
            return Err(err(ln, "entry lines need row, column and value"));
        }
        let i: usize = t[0]
            .parse()
            .map_err(|_| err(ln, "cannot parse row index"))?;
        let j: usize = t[1]
            .parse()
            .map_err(|_| err(ln, "cannot parse column index"))?;
        let v: f64 = t[2].parse().map_err(|_| err(ln, "cannot parse value"))?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(err(ln, "index out of range"));
        }
        if symmetric && j > i {
            return Err(err(ln, "symmetric files must list the lower triangle"));
        }
        entries.push((i - 1, j - 1, v));
    }
    if entries.len() != nnz {
        return Err(err(0, "fewer entries than declared"));
    }
    Ok(Parsed {
        symmetric,
        rows,
        cols,
        entries,
    })
}

pub fn read_symmetric(text: &str) -> Result<SparseSymMatrix, MatrixMarketError> {
    let p = parse(text)?;
    if !p.symmetric {
        return Err(MatrixMarketError::Symmetry {
            expected: "symmetric",
            found: "general",
        });
    }
    Ok(SparseSymMatrix::from_triplets(p.rows, &p.entries))
}

pub fn read_general(text: &str) -> Result<CsrMatrix, MatrixMarketError> {
    let p = parse(text)?;
    if p.symmetric {
        let mut trip = p.entries.clone();
        trip.extend(
            p.entries
                .iter()
                .filter(|e| e.0 != e.1)
                .map(|&(i, j, v)| (j, i, v)),
        );
        return Ok(CsrMatrix::from_triplets(p.rows, p.cols, &trip));
    }
    Ok(CsrMatrix::from_triplets(p.rows, p.cols, &p.entries))
}
