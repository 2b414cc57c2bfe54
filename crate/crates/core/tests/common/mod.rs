//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spline_spde::bernstein::local_matrices;
use spline_spde::mesh::{Point, Triangulation};
use spline_spde::space::SplineSpace;
use spline_spde::sparse::{CsrMatrix, SparseSymMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Structured mesh of `[0, 1]^2` with interior vertices moved by up to 15% of the cell size.
pub fn jittered_mesh(nx: usize, ny: usize, seed: u64) -> Triangulation {
    let base = Triangulation::structured_rectangle(0.0, 1.0, 0.0, 1.0, nx, ny).unwrap();
    let mut rng = rng(seed);
    let (hx, hy) = (1.0 / nx as f64, 1.0 / ny as f64);
    let verts: Vec<Point> = base
        .vertices()
        .iter()
        .map(|&[x, y]| {
            let interior = x > 1e-12 && x < 1.0 - 1e-12 && y > 1e-12 && y < 1.0 - 1e-12;
            if interior {
                [
                    x + 0.15 * hx * rng.random_range(-1.0..1.0),
                    y + 0.15 * hy * rng.random_range(-1.0..1.0),
                ]
            } else {
                [x, y]
            }
        })
        .collect();
    Triangulation::new(verts, base.triangles().to_vec()).unwrap()
}

pub fn space(mesh: Triangulation, d: usize) -> SplineSpace {
    SplineSpace::new(Arc::new(mesh), d).unwrap()
}

/// A uniformly distributed point inside triangle `t`.
pub fn point_in(mesh: &Triangulation, t: usize, rng: &mut ChaCha8Rng) -> Point {
    let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    mesh.point_at(t, [1.0 - u - v, u, v])
}

pub fn dense_sym(m: &SparseSymMatrix) -> DMatrix<f64> {
    let n = m.n();
    let mut out = DMatrix::zeros(n, n);
    for (i, j, v) in m.iter_lower() {
        out[(i, j)] = v;
        out[(j, i)] = v;
    }
    out
}

pub fn dense_csr(m: &CsrMatrix) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.rows(), m.cols());
    for (i, j, v) in m.iter() {
        out[(i, j)] += v;
    }
    out
}

pub fn sparse_from_dense(m: &DMatrix<f64>) -> SparseSymMatrix {
    let mut t = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..=i {
            if m[(i, j)] != 0.0 {
                t.push((i, j, m[(i, j)]));
            }
        }
    }
    SparseSymMatrix::from_triplets(m.nrows(), &t)
}

/// Mass, stiffness and roughness assembled densely from element matrices.
pub fn dense_system(space: &SplineSpace) -> [DMatrix<f64>; 3] {
    let n = space.dim();
    let mesh = space.mesh();
    let mut out = [
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
    ];
    for t in 0..mesh.num_triangles() {
        let el = local_matrices(space.degree(), mesh.triangle_points(t)).unwrap();
        let dofs = space.triangle_dofs(t);
        for (slot, local) in out.iter_mut().zip([&el.mass, &el.stiffness, &el.roughness]) {
            for (a, &ga) in dofs.iter().enumerate() {
                for (b, &gb) in dofs.iter().enumerate() {
                    slot[(ga, gb)] += local.row(a)[b];
                }
            }
        }
    }
    out
}

/// Largest entrywise deviation relative to the oracle's largest entry.
pub fn max_rel_diff(a: &DMatrix<f64>, oracle: &DMatrix<f64>) -> f64 {
    let scale = oracle.amax().max(f64::MIN_POSITIVE);
    (a - oracle).amax() / scale
}
