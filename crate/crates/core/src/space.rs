//! The continuous spline space `S^0_d` over a triangulation and its nodal basis.
//!
//! Every domain point `(i v1 + j v2 + k v3) / d` of every triangle carries one
//! B-coefficient. Points on shared vertices and edges are identified, and the
//! nodal basis function of a global domain point is the spline whose
//! B-coefficient there is one and zero everywhere else.
//!
//! Global numbering: mesh vertices first (mesh order), then edge-interior
//! points edge by edge (positions counted from the lower-numbered endpoint),
//! then triangle-interior points triangle by triangle in local storage order.

use std::sync::Arc;

use thiserror::Error;

use crate::bernstein::{basis_len, bernstein_all, de_casteljau, multi_indices, MAX_DEGREE};
use crate::mesh::{Barycentric, Point, Triangulation};
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("spline degree {0} outside the supported range 1..={MAX_DEGREE}")]
    DegreeOutOfRange(usize),
    #[error("point ({x}, {y}) lies outside the triangulation")]
    OutsideDomain { x: f64, y: f64 },
    #[error("weight vector has length {found}, space dimension is {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Where a global domain point sits in the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainPointKind {
    Vertex(usize),
    /// `position` in `1..d`, counted from the lower-numbered endpoint.
    Edge {
        edge: usize,
        position: usize,
    },
    Interior {
        triangle: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainPoint {
    pub location: Point,
    pub kind: DomainPointKind,
}

/// Nonzero nodal basis values at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEvaluation {
    pub point: Point,
    pub entries: Vec<(usize, f64)>,
}

impl BasisEvaluation {
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(h, v)| w[h] * v).sum()
    }
}

#[derive(Debug, Clone)]
pub struct SplineSpace {
    degree: usize,
    mesh: Arc<Triangulation>,
    domain_points: Vec<DomainPoint>,
    local_to_global: Vec<usize>,
}

/// `V + (d-1) E + (d-1)(d-2)/2 T`.
pub fn dimension_formula(vertices: usize, edges: usize, triangles: usize, degree: usize) -> usize {
    let d = degree;
    vertices + (d - 1) * edges + (d - 1) * d.saturating_sub(2) / 2 * triangles
}

impl SplineSpace {
    pub fn new(mesh: Arc<Triangulation>, degree: usize) -> Result<Self, SpaceError> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(SpaceError::DegreeOutOfRange(degree));
        }
        let d = degree;
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let nt = mesh.num_triangles();
        let per_edge = d - 1;
        let per_tri = (d - 1) * d.saturating_sub(2) / 2;
        let edge_base = nv;
        let tri_base = nv + ne * per_edge;

        let mut domain_points = Vec::with_capacity(dimension_formula(nv, ne, nt, d));
        for (v, &p) in mesh.vertices().iter().enumerate() {
            domain_points.push(DomainPoint {
                location: p,
                kind: DomainPointKind::Vertex(v),
            });
        }
        for (e, edge) in mesh.edges().iter().enumerate() {
            let a = mesh.vertices()[edge.vertices[0]];
            let b = mesh.vertices()[edge.vertices[1]];
            for position in 1..d {
                let s = position as f64 / d as f64;
                domain_points.push(DomainPoint {
                    location: [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
                    kind: DomainPointKind::Edge { edge: e, position },
                });
            }
        }

        let slots = multi_indices(d);
        let nloc = slots.len();
        let mut local_to_global = Vec::with_capacity(nt * nloc);
        for t in 0..nt {
            let tri = mesh.triangles()[t];
            let edges = mesh.triangle_edges(t);
            let mut interior = 0;
            for m in &slots {
                let c = [m.i, m.j, m.k];
                let zeros = c.iter().filter(|&&x| x == 0).count();
                let g = match zeros {
                    2 => tri[c.iter().position(|&x| x == d).expect("vertex slot")],
                    1 => {
                        // local edge e is opposite local vertex e; walk from its first endpoint
                        let e = c.iter().position(|&x| x == 0).expect("edge slot");
                        let from = (e + 1) % 3;
                        let to = (e + 2) % 3;
                        let toward = c[to];
                        let edge = &mesh.edges()[edges[e]];
                        let position = if edge.vertices[0] == tri[from] {
                            toward
                        } else {
                            d - toward
                        };
                        debug_assert!(edge.vertices[0] == tri[from] || edge.vertices[0] == tri[to]);
                        edge_base + edges[e] * per_edge + position - 1
                    }
                    _ => {
                        let g = tri_base + t * per_tri + interior;
                        if interior == 0 {
                            debug_assert_eq!(domain_points.len(), g);
                        }
                        interior += 1;
                        let loc = mesh.point_at(
                            t,
                            [
                                m.i as f64 / d as f64,
                                m.j as f64 / d as f64,
                                m.k as f64 / d as f64,
                            ],
                        );
                        domain_points.push(DomainPoint {
                            location: loc,
                            kind: DomainPointKind::Interior { triangle: t },
                        });
                        g
                    }
                };
                local_to_global.push(g);
            }
        }
        debug_assert_eq!(domain_points.len(), dimension_formula(nv, ne, nt, d));

        Ok(Self {
            degree,
            mesh,
            domain_points,
            local_to_global,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn mesh(&self) -> &Arc<Triangulation> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.domain_points.len()
    }

    /// Number of B-coefficients per triangle.
    pub fn local_len(&self) -> usize {
        basis_len(self.degree)
    }

    pub fn domain_points(&self) -> &[DomainPoint] {
        &self.domain_points
    }

    /// Global basis index for every local slot of triangle `t`.
    pub fn triangle_dofs(&self, t: usize) -> &[usize] {
        let n = self.local_len();
        &self.local_to_global[t * n..(t + 1) * n]
    }

    /// The 0/1 matrix `C` whose column `h` stacks the per-triangle
    /// B-coefficients of basis function `h`.
    pub fn scatter_matrix(&self) -> CsrMatrix {
        let trip: Vec<_> = self
            .local_to_global
            .iter()
            .enumerate()
            .map(|(row, &g)| (row, g, 1.0))
            .collect();
        CsrMatrix::from_triplets(self.local_to_global.len(), self.dim(), &trip)
    }

    pub fn locate(&self, p: Point) -> Result<Barycentric, SpaceError> {
        self.mesh
            .locate(p)
            .ok_or(SpaceError::OutsideDomain { x: p[0], y: p[1] })
    }

    /// Nodal basis values at `p`; exact zeros are omitted.
    pub fn eval_basis(&self, p: Point) -> Result<BasisEvaluation, SpaceError> {
        let bc = self.locate(p)?;
        Ok(self.eval_basis_at(p, bc))
    }

    /// Basis values using a given triangle and barycentric coordinates.
    pub fn eval_basis_at(&self, p: Point, bc: Barycentric) -> BasisEvaluation {
        let vals = bernstein_all(self.degree, bc.b);
        let entries = self
            .triangle_dofs(bc.triangle)
            .iter()
            .zip(vals)
            .filter(|(_, v)| *v != 0.0)
            .map(|(&g, v)| (g, v))
            .collect();
        BasisEvaluation { point: p, entries }
    }

    /// `sum_h w_h psi_h(p)` via de Casteljau on the gathered B-coefficients.
    pub fn eval_spline(&self, w: &[f64], p: Point) -> Result<f64, SpaceError> {
        self.check_len(w)?;
        let bc = self.locate(p)?;
        Ok(self.eval_spline_at(w, bc))
    }

    pub fn eval_spline_at(&self, w: &[f64], bc: Barycentric) -> f64 {
        let coeffs: Vec<f64> = self
            .triangle_dofs(bc.triangle)
            .iter()
            .map(|&g| w[g])
            .collect();
        de_casteljau(self.degree, &coeffs, bc.b)
    }

    pub fn check_len(&self, w: &[f64]) -> Result<(), SpaceError> {
        if w.len() != self.dim() {
            return Err(SpaceError::DimensionMismatch {
                expected: self.dim(),
                found: w.len(),
            });
        }
        Ok(())
    }
}
