//! Conforming planar triangulations.
//!
//! A [`Triangulation`] is validated on construction: every triangle must have
//! a non-negligible area, every edge may be shared by at most two triangles
//! and no vertex may lie in the interior of an unmatched edge (a hanging
//! vertex). Triangles are stored counter-clockwise; clockwise input is
//! reordered by swapping the second and third vertex.
//!
//! Meshes are inputs to this crate. Boundary effects of the SPDE are usually
//! reduced by extending the region of interest with a band of coarse
//! triangles before loading the mesh.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

/// A point (or vector) in the plane.
pub type Point = [f64; 2];

/// Barycentric components that are at least `-TIE_TOLERANCE` count as inside.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Relative degeneracy threshold: a triangle is rejected when its area is
/// below this factor times the squared bounding-box diagonal of the mesh.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh has no triangles")]
    Empty,
    #[error("triangle {triangle} references vertex {vertex} but the mesh has {count} vertices")]
    VertexOutOfRange {
        triangle: usize,
        vertex: usize,
        count: usize,
    },
    #[error("triangle {triangle} is degenerate (area {area:e})")]
    Degenerate { triangle: usize, area: f64 },
    #[error("non-conforming mesh: {0}")]
    NonConforming(String),
    #[error("vertex {0} is not referenced by any triangle")]
    UnusedVertex(usize),
    #[error("invalid grid specification: {0}")]
    InvalidGrid(String),
}

/// Barycentric coordinates of a point relative to one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barycentric {
    pub triangle: usize,
    pub b: [f64; 3],
}

/// Directional coordinates of a vector relative to one triangle; they sum to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Directional {
    pub triangle: usize,
    pub a: [f64; 3],
}

/// An edge between two vertices, `vertices[0] < vertices[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// The first incident triangle and, for interior edges, the second one.
    pub triangles: (usize, Option<usize>),
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles.1.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
    edges: Vec<Edge>,
    // local edge `e` of a triangle is the one opposite its local vertex `e`
    triangle_edges: Vec<[usize; 3]>,
    locator: GridLocator,
}

#[inline]
fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn signed_area(p: [Point; 3]) -> f64 {
    0.5 * cross(sub(p[1], p[0]), sub(p[2], p[0]))
}

impl Triangulation {
    /// Validates the mesh and derives the edge table.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let nv = vertices.len();
        let mut used = vec![false; nv];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange {
                        triangle: t,
                        vertex: v,
                        count: nv,
                    });
                }
                used[v] = true;
            }
        }

        let (lo, hi) = bounding_box(&vertices);
        let diag2 = (hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2);
        let min_area = DEGENERACY_TOLERANCE * diag2;

        let mut triangles = triangles;
        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            let mut area = signed_area([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] || area.abs() < min_area {
                return Err(MeshError::Degenerate { triangle: t, area });
            }
            if area < 0.0 {
                tri.swap(1, 2);
                area = -area;
            }
            areas.push(area);
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::UnusedVertex(v));
        }

        let mut edge_ids: HashMap<(usize, usize), usize> =
            HashMap::with_capacity(3 * triangles.len() / 2 + 8);
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (e, slot) in local.iter_mut().enumerate() {
                let a = tri[(e + 1) % 3];
                let b = tri[(e + 2) % 3];
                let key = (a.min(b), a.max(b));
                match edge_ids.get(&key) {
                    Some(&id) => {
                        let edge = &mut edges[id];
                        if edge.triangles.1.is_some() {
                            return Err(MeshError::NonConforming(format!(
                                "edge ({}, {}) is shared by more than two triangles",
                                key.0, key.1
                            )));
                        }
                        edge.triangles.1 = Some(t);
                        *slot = id;
                    }
                    None => {
                        let id = edges.len();
                        edges.push(Edge {
                            vertices: [key.0, key.1],
                            triangles: (t, None),
                        });
                        edge_ids.insert(key, id);
                        *slot = id;
                    }
                }
            }
            triangle_edges.push(local);
        }

        check_hanging_vertices(&vertices, &edges, diag2.sqrt())?;

        let locator = GridLocator::build(&vertices, &triangles, lo, hi);
        Ok(Self {
            vertices,
            triangles,
            areas,
            edges,
            triangle_edges,
            locator,
        })
    }

    /// Parses the node/element text format.
    ///
    /// ```text
    /// # comment
    /// 4 2 0 0          <- vertex count, dimension, attributes, markers
    /// 0 0.0 0.0
    /// ...
    /// 2 3 0            <- triangle count, nodes per triangle, attributes
    /// 0 0 1 2
    /// ...
    /// ```
    /// Indices are 0-based; vertex and triangle ids may appear in any order.
    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let perr = |line: usize, message: String| MeshError::Parse { line, message };
        fn next_line<'a>(
            lines: &mut impl Iterator<Item = (usize, &'a str)>,
            what: &str,
        ) -> Result<(usize, &'a str), MeshError> {
            lines.next().ok_or_else(|| MeshError::Parse {
                line: 0,
                message: format!("unexpected end of input while reading {what}"),
            })
        }

        let (hline, header) = next_line(&mut lines, "the vertex header")?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let nv: usize = parse_token(&h, 0, hline, "vertex count")?;
        let dim: usize = if h.len() > 1 {
            parse_token(&h, 1, hline, "dimension")?
        } else {
            2
        };
        if dim != 2 {
            return Err(perr(hline, format!("dimension must be 2, found {dim}")));
        }
        let n_attr: usize = if h.len() > 2 {
            parse_token(&h, 2, hline, "attribute count")?
        } else {
            0
        };
        let n_mark: usize = if h.len() > 3 {
            parse_token(&h, 3, hline, "marker count")?
        } else {
            0
        };

        let mut vertices: Vec<Option<Point>> = vec![None; nv];
        for _ in 0..nv {
            let (ln, l) = next_line(&mut lines, "vertices")?;
            let tok: Vec<&str> = l.split_whitespace().collect();
            if tok.len() != 3 + n_attr + n_mark {
                return Err(perr(
                    ln,
                    format!(
                        "expected {} columns, found {}",
                        3 + n_attr + n_mark,
                        tok.len()
                    ),
                ));
            }
            let id: usize = parse_token(&tok, 0, ln, "vertex index")?;
            let x: f64 = parse_token(&tok, 1, ln, "x coordinate")?;
            let y: f64 = parse_token(&tok, 2, ln, "y coordinate")?;
            if !x.is_finite() || !y.is_finite() {
                return Err(perr(ln, "non-finite coordinate".into()));
            }
            match vertices.get_mut(id) {
                Some(slot @ None) => *slot = Some([x, y]),
                Some(Some(_)) => return Err(perr(ln, format!("duplicate vertex index {id}"))),
                None => return Err(perr(ln, format!("vertex index {id} out of range 0..{nv}"))),
            }
        }

        let (tline, theader) = next_line(&mut lines, "the triangle header")?;
        let h: Vec<&str> = theader.split_whitespace().collect();
        let nt: usize = parse_token(&h, 0, tline, "triangle count")?;
        let per: usize = if h.len() > 1 {
            parse_token(&h, 1, tline, "nodes per triangle")?
        } else {
            3
        };
        if per != 3 {
            return Err(perr(
                tline,
                format!("only 3-node triangles are supported, found {per}"),
            ));
        }
        let t_attr: usize = if h.len() > 2 {
            parse_token(&h, 2, tline, "attribute count")?
        } else {
            0
        };

        let mut triangles: Vec<Option<[usize; 3]>> = vec![None; nt];
        for _ in 0..nt {
            let (ln, l) = next_line(&mut lines, "triangles")?;
            let tok: Vec<&str> = l.split_whitespace().collect();
            if tok.len() != 4 + t_attr {
                return Err(perr(
                    ln,
                    format!("expected {} columns, found {}", 4 + t_attr, tok.len()),
                ));
            }
            let id: usize = parse_token(&tok, 0, ln, "triangle index")?;
            let tri = [
                parse_token(&tok, 1, ln, "vertex index")?,
                parse_token(&tok, 2, ln, "vertex index")?,
                parse_token(&tok, 3, ln, "vertex index")?,
            ];
            match triangles.get_mut(id) {
                Some(slot @ None) => *slot = Some(tri),
                Some(Some(_)) => return Err(perr(ln, format!("duplicate triangle index {id}"))),
                None => {
                    return Err(perr(
                        ln,
                        format!("triangle index {id} out of range 0..{nt}"),
                    ))
                }
            }
        }
        if let Some((ln, _)) = lines.next() {
            return Err(perr(ln, "trailing content after the triangle list".into()));
        }

        let vertices = vertices
            .into_iter()
            .map(|v| v.expect("all vertex ids filled"))
            .collect();
        let triangles = triangles
            .into_iter()
            .map(|t| t.expect("all triangle ids filled"))
            .collect();
        Self::new(vertices, triangles)
    }

    /// Serializes the mesh in the format accepted by [`Triangulation::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} 2 0 0", self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(out, "{i} {} {}", v[0], v[1]);
        }
        let _ = writeln!(out, "{} 3 0", self.triangles.len());
        for (i, t) in self.triangles.iter().enumerate() {
            let _ = writeln!(out, "{i} {} {} {}", t[0], t[1], t[2]);
        }
        out
    }

    /// A rectangle split into `nx * ny` cells, each cut into two triangles.
    /// Diagonals alternate in a checkerboard pattern to avoid a preferred direction.
    pub fn structured_rectangle(
        xmin: f64,
        xmax: f64,
        ymin: f64,
        ymax: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Self, MeshError> {
        if nx == 0 || ny == 0 {
            return Err(MeshError::InvalidGrid(
                "cell counts must be positive".into(),
            ));
        }
        if !(xmax > xmin && ymax > ymin) {
            return Err(MeshError::InvalidGrid("empty rectangle".into()));
        }
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            let y = ymin + (ymax - ymin) * j as f64 / ny as f64;
            for i in 0..=nx {
                let x = xmin + (xmax - xmin) * i as f64 / nx as f64;
                vertices.push([x, y]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if (i + j) % 2 == 0 {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    /// Edge ids of triangle `t`; entry `e` is the edge opposite local vertex `e`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Area of triangle `t` (always positive).
    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Euler characteristic V - E + T; equals 1 for meshes of a disk.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    /// Length of the longest edge.
    pub fn mesh_size(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| {
                let d = sub(self.vertices[e.vertices[1]], self.vertices[e.vertices[0]]);
                d[0].hypot(d[1])
            })
            .fold(0.0, f64::max)
    }

    /// Axis-aligned bounding box `(min, max)` of the vertices.
    pub fn bounding_box(&self) -> (Point, Point) {
        bounding_box(&self.vertices)
    }

    /// Barycentric coordinates of `p` relative to triangle `t` (p need not lie inside).
    pub fn barycentric(&self, t: usize, p: Point) -> Barycentric {
        let [v1, v2, v3] = self.triangle_points(t);
        let e1 = sub(v2, v1);
        let e2 = sub(v3, v1);
        let d = sub(p, v1);
        let det = cross(e1, e2);
        let b2 = cross(d, e2) / det;
        let b3 = cross(e1, d) / det;
        Barycentric {
            triangle: t,
            b: [1.0 - b2 - b3, b2, b3],
        }
    }

    /// Directional coordinates of vector `u` relative to triangle `t`.
    pub fn directional(&self, t: usize, u: Point) -> Directional {
        Directional {
            triangle: t,
            a: directional_coords(self.triangle_points(t), u),
        }
    }

    /// Cartesian point with barycentric coordinates `b` in triangle `t`.
    pub fn point_at(&self, t: usize, b: [f64; 3]) -> Point {
        let [v1, v2, v3] = self.triangle_points(t);
        [
            b[0] * v1[0] + b[1] * v2[0] + b[2] * v3[0],
            b[0] * v1[1] + b[1] * v2[1] + b[2] * v3[1],
        ]
    }

    /// Finds a triangle containing `p`. Points on shared edges or vertices
    /// resolve to the lowest-indexed containing triangle. `None` means outside.
    pub fn locate(&self, p: Point) -> Option<Barycentric> {
        self.locator
            .candidates(p)
            .iter()
            .map(|&t| self.barycentric(t as usize, p))
            .find(|bc| bc.b.iter().all(|&x| x >= -TIE_TOLERANCE))
    }

    /// Splits every triangle into four through its edge midpoints.
    ///
    /// Old vertices keep their ids; the midpoint of edge `e` becomes vertex
    /// `V + e`. The children of triangle `t` are `4t..4t+4`, the last one
    /// being the central triangle.
    pub fn refine_uniform(&self) -> Self {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.edges.iter().map(|e| {
            let a = self.vertices[e.vertices[0]];
            let b = self.vertices[e.vertices[1]];
            [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
        }));
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (t, &[v1, v2, v3]) in self.triangles.iter().enumerate() {
            let [e23, e31, e12] = self.triangle_edges[t];
            let (m23, m31, m12) = (nv + e23, nv + e31, nv + e12);
            triangles.push([v1, m12, m31]);
            triangles.push([m12, v2, m23]);
            triangles.push([m31, m23, v3]);
            triangles.push([m12, m23, m31]);
        }
        Self::new(vertices, triangles).expect("midpoint refinement of a valid mesh is valid")
    }
}

/// Directional coordinates of `u` with respect to the triangle with the given vertices.
pub fn directional_coords(verts: [Point; 3], u: Point) -> [f64; 3] {
    let e1 = sub(verts[1], verts[0]);
    let e2 = sub(verts[2], verts[0]);
    let det = cross(e1, e2);
    let a2 = cross(u, e2) / det;
    let a3 = cross(e1, u) / det;
    [-a2 - a3, a2, a3]
}

fn parse_token<T: std::str::FromStr>(
    tok: &[&str],
    i: usize,
    line: usize,
    what: &str,
) -> Result<T, MeshError> {
    let s = tok.get(i).ok_or_else(|| MeshError::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    s.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("cannot parse {what} from {s:?}"),
    })
}

fn bounding_box(points: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    (lo, hi)
}

// A vertex in the interior of another triangle's edge leaves that edge
// unmatched, so only boundary edges need to be checked.
fn check_hanging_vertices(vertices: &[Point], edges: &[Edge], scale: f64) -> Result<(), MeshError> {
    let tol = 1e-10 * scale;
    let boundary: Vec<&Edge> = edges.iter().filter(|e| e.is_boundary()).collect();
    for e in boundary {
        let a = vertices[e.vertices[0]];
        let b = vertices[e.vertices[1]];
        let ab = sub(b, a);
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let (xlo, xhi) = (a[0].min(b[0]) - tol, a[0].max(b[0]) + tol);
        let (ylo, yhi) = (a[1].min(b[1]) - tol, a[1].max(b[1]) + tol);
        for (v, &p) in vertices.iter().enumerate() {
            if v == e.vertices[0] || v == e.vertices[1] {
                continue;
            }
            if p[0] < xlo || p[0] > xhi || p[1] < ylo || p[1] > yhi {
                continue;
            }
            let ap = sub(p, a);
            let dist = cross(ab, ap).abs() / len2.sqrt();
            let s = (ap[0] * ab[0] + ap[1] * ab[1]) / len2;
            if dist <= tol && s > 0.0 && s < 1.0 {
                return Err(MeshError::NonConforming(format!(
                    "vertex {v} lies inside edge ({}, {})",
                    e.vertices[0], e.vertices[1]
                )));
            }
        }
    }
    Ok(())
}

/// Uniform background grid bucketing triangles by bounding box.
#[derive(Debug, Clone)]
struct GridLocator {
    origin: Point,
    cell: Point,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl GridLocator {
    fn build(vertices: &[Point], triangles: &[[usize; 3]], lo: Point, hi: Point) -> Self {
        let side = (triangles.len() as f64).sqrt().ceil().max(1.0) as usize;
        let (nx, ny) = (side, side);
        let pad = 1e-9 * ((hi[0] - lo[0]).hypot(hi[1] - lo[1])).max(f64::MIN_POSITIVE);
        let origin = [lo[0] - pad, lo[1] - pad];
        let cell = [
            (hi[0] - lo[0] + 2.0 * pad) / nx as f64,
            (hi[1] - lo[1] + 2.0 * pad) / ny as f64,
        ];
        let mut grid = Self {
            origin,
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for (t, tri) in triangles.iter().enumerate() {
            let pts: Vec<Point> = tri.iter().map(|&v| vertices[v]).collect();
            let (tlo, thi) = bounding_box(&pts);
            let (i0, j0) = grid.cell_of([tlo[0] - pad, tlo[1] - pad]);
            let (i1, j1) = grid.cell_of([thi[0] + pad, thi[1] + pad]);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    grid.buckets[j * nx + i].push(t as u32);
                }
            }
        }
        grid
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let fx = ((p[0] - self.origin[0]) / self.cell[0]).floor();
        let fy = ((p[1] - self.origin[1]) / self.cell[1]).floor();
        (
            (fx.max(0.0) as usize).min(self.nx - 1),
            (fy.max(0.0) as usize).min(self.ny - 1),
        )
    }

    fn candidates(&self, p: Point) -> &[u32] {
        let x = (p[0] - self.origin[0]) / self.cell[0];
        let y = (p[1] - self.origin[1]) / self.cell[1];
        if !(x >= 0.0 && y >= 0.0 && x <= self.nx as f64 && y <= self.ny as f64) {
            return &[];
        }
        let (i, j) = self.cell_of(p);
        &self.buckets[j * self.nx + i]
    }
}
