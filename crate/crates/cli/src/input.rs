//! Parsing of mesh, observation and grid inputs.

use std::fs;
use std::path::Path;

use spline_spde::mesh::{Point, Triangulation};
use spline_spde::model::Observations;
use spline_spde::space::SplineSpace;

use crate::error::CliError;

pub fn read_mesh(path: &Path) -> Result<Triangulation, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read mesh {}: {e}", path.display())))?;
    Triangulation::parse(&text)
        .map_err(|e| CliError::from(e).context(format!("mesh {}", path.display())))
}

fn parse_number(field: &str, what: &str) -> Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("invalid {what} '{field}'"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{what} must be finite, got '{field}'"))
    }
}

/// Reads `x,y,value` rows. A first row that does not parse as numbers is taken
/// as a header; `#` starts a comment line. Every row must lie inside the mesh.
pub fn read_observations(path: &Path, space: &SplineSpace) -> Result<Observations, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| {
            CliError::validation(format!("cannot read observations {}: {e}", path.display()))
        })?;
    let name = path.display().to_string();
    let mut locations = Vec::new();
    let mut values = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::validation(format!("{name}: {e}")))?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        let at = |msg: String| CliError::validation(format!("{name} line {line}: {msg}"));
        if record.len() != 3 {
            return Err(at(format!(
                "expected 3 columns x,y,value, found {}",
                record.len()
            )));
        }
        if k == 0 && record[0].parse::<f64>().is_err() {
            continue;
        }
        let x = parse_number(&record[0], "x").map_err(at)?;
        let y = parse_number(&record[1], "y").map_err(at)?;
        let v = parse_number(&record[2], "value").map_err(at)?;
        if space.locate([x, y]).is_err() {
            return Err(at(format!("point ({x}, {y}) lies outside the mesh")));
        }
        locations.push([x, y]);
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::validation(format!("{name}: no observations")));
    }
    Ok(Observations::new(locations, values)?)
}

/// Regular evaluation grid, `x` varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Grid {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64, step: f64) -> Result<Self, String> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(format!("step must be positive, got {step}"));
        }
        let axis = |lo: f64, hi: f64, name: &str| -> Result<Vec<f64>, String> {
            if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
                return Err(format!("{name} range {lo}:{hi} is empty"));
            }
            // tolerate rounding in (hi - lo) / step
            let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            if n > 100_000 {
                return Err(format!("{name} axis would have {n} points"));
            }
            Ok((0..n).map(|i| lo + i as f64 * step).collect())
        };
        Ok(Self {
            xs: axis(xmin, xmax, "x")?,
            ys: axis(ymin, ymax, "y")?,
        })
    }

    pub fn points(&self) -> Vec<Point> {
        self.xs
            .iter()
            .flat_map(|&x| self.ys.iter().map(move |&y| [x, y]))
            .collect()
    }
}

/// `xmin:xmax:ymin:ymax:step`.
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 5 {
        return Err(format!("expected xmin:xmax:ymin:ymax:step, got '{s}'"));
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("invalid number '{p}' in grid '{s}'"))
        })
        .collect::<Result<_, _>>()?;
    Grid::new(v[0], v[1], v[2], v[3], v[4])
}

/// Tensor B-spline sizes of the two non-stationary fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonStatSpec {
    pub kappa: (usize, usize),
    pub tau: (usize, usize),
}

/// `KX,KY,TX,TY`.
pub fn parse_nonstat(s: &str) -> Result<NonStatSpec, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| format!("invalid count '{p}' in '{s}'"))
        })
        .collect::<Result<_, _>>()?;
    match v[..] {
        [kx, ky, tx, ty] if v.iter().all(|&n| n >= 1) => Ok(NonStatSpec {
            kappa: (kx, ky),
            tau: (tx, ty),
        }),
        _ => Err(format!(
            "expected four positive counts KX,KY,TX,TY, got '{s}'"
        )),
    }
}
