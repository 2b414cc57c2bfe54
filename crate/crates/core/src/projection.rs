//! `L^2` projection of functions onto a spline space and `L^2` errors.

use rayon::prelude::*;

use crate::bernstein::bernstein_all;
use crate::gmrf::{CholeskyFactor, GmrfError};
use crate::mesh::Point;
use crate::quadrature::TriangleRule;
use crate::space::SplineSpace;
use crate::sparse::SparseSymMatrix;

/// `b_h = int f psi_h` using the given triangle rule.
pub fn load_vector<F>(space: &SplineSpace, f: F, rule: &TriangleRule) -> Vec<f64>
where
    F: Fn(Point) -> f64 + Sync,
{
    let mesh = space.mesh();
    let basis: Vec<Vec<f64>> = rule
        .points
        .iter()
        .map(|&b| bernstein_all(space.degree(), b))
        .collect();
    let locals: Vec<Vec<f64>> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let area = mesh.area(t);
            let mut local = vec![0.0; space.local_len()];
            for ((b, w), vals) in rule.points.iter().zip(&rule.weights).zip(&basis) {
                let fv = area * w * f(mesh.point_at(t, *b));
                for (l, v) in local.iter_mut().zip(vals) {
                    *l += fv * v;
                }
            }
            local
        })
        .collect();
    let mut out = vec![0.0; space.dim()];
    for (t, local) in locals.iter().enumerate() {
        for (&g, v) in space.triangle_dofs(t).iter().zip(local) {
            out[g] += v;
        }
    }
    out
}

/// Weights `w` of the `L^2` projection: `M w = b`.
pub fn project<F>(
    space: &SplineSpace,
    mass: &SparseSymMatrix,
    f: F,
    rule: &TriangleRule,
) -> Result<Vec<f64>, GmrfError>
where
    F: Fn(Point) -> f64 + Sync,
{
    let b = load_vector(space, f, rule);
    CholeskyFactor::factorize(mass)?.solve(&b)
}

/// `|| f - sum_h w_h psi_h ||_{L^2}`.
pub fn l2_error<F>(space: &SplineSpace, w: &[f64], f: F, rule: &TriangleRule) -> f64
where
    F: Fn(Point) -> f64 + Sync,
{
    let mesh = space.mesh();
    let basis: Vec<Vec<f64>> = rule
        .points
        .iter()
        .map(|&b| bernstein_all(space.degree(), b))
        .collect();
    let sq: f64 = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let dofs = space.triangle_dofs(t);
            let mut acc = 0.0;
            for ((b, wq), vals) in rule.points.iter().zip(&rule.weights).zip(&basis) {
                let s: f64 = dofs.iter().zip(vals).map(|(&g, v)| w[g] * v).sum();
                acc += wq * (f(mesh.point_at(t, *b)) - s).powi(2);
            }
            acc * mesh.area(t)
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    sq.sqrt()
}

/// Least-squares slope of `log2(error)` against `-log2(h)`.
pub fn fitted_order(mesh_sizes: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = mesh_sizes.iter().map(|h| -h.log2()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.log2()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -sxy / sxx
}
