//! Bernstein–Bézier polynomials on a single triangle.
//!
//! A polynomial of degree `d` is stored by its B-coefficients `c_ijk`,
//! `i + j + k = d`, ordered lexicographically with `i` descending and then
//! `j` descending:
//!
//! ```text
//! d = 2:  (2,0,0) (1,1,0) (1,0,1) (0,2,0) (0,1,1) (0,0,2)
//! ```
//!
//! The position of `(i, j, k)` in that order only depends on `j` and `k`
//! (`r = j + k`, position `r (r + 1) / 2 + k`), which lets the de Casteljau
//! and derivative recurrences run in place over the same layout for every
//! degree.

use thiserror::Error;

use crate::dense::DenseMatrix;
use crate::mesh::{directional_coords, Point};

/// Highest polynomial degree supported by the exact binomial tables.
pub const MAX_DEGREE: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum BernsteinError {
    #[error("multi-index ({i}, {j}, {k}) does not have degree {degree}")]
    InvalidMultiIndex {
        i: usize,
        j: usize,
        k: usize,
        degree: usize,
    },
    #[error("expected {expected} coefficients for degree {degree}, found {found}")]
    CoefficientCount {
        degree: usize,
        expected: usize,
        found: usize,
    },
    #[error("cannot differentiate a polynomial of degree 0")]
    ZeroDegree,
    #[error("degree {0} exceeds the supported maximum {MAX_DEGREE}")]
    DegreeTooLarge(usize),
    #[error("degenerate triangle (area {0:e})")]
    DegenerateTriangle(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl MultiIndex {
    pub const fn new(i: usize, j: usize, k: usize) -> Self {
        Self { i, j, k }
    }

    pub const fn degree(&self) -> usize {
        self.i + self.j + self.k
    }

    /// Position of this index in the coefficient layout of its degree.
    pub const fn position(&self) -> usize {
        slot(self.j, self.k)
    }
}

#[inline]
const fn slot(j: usize, k: usize) -> usize {
    let r = j + k;
    r * (r + 1) / 2 + k
}

/// Number of Bernstein polynomials of degree `d`: `(d+1)(d+2)/2`.
pub const fn basis_len(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// All multi-indices of degree `d` in storage order.
pub fn multi_indices(d: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(basis_len(d));
    for i in (0..=d).rev() {
        for j in (0..=d - i).rev() {
            out.push(MultiIndex::new(i, j, d - i - j));
        }
    }
    out
}

/// Exact binomial coefficient.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for t in 0..k {
        // acc * (n - t) is divisible by (t + 1) at every step
        acc = acc * (n - t) as u64 / (t + 1) as u64;
    }
    acc
}

/// `B^d_ijk(b) = d!/(i! j! k!) b1^i b2^j b3^k`.
pub fn bernstein_value(d: usize, m: MultiIndex, b: [f64; 3]) -> Result<f64, BernsteinError> {
    if m.degree() != d {
        return Err(BernsteinError::InvalidMultiIndex {
            i: m.i,
            j: m.j,
            k: m.k,
            degree: d,
        });
    }
    let multinomial = (binomial(d, m.i) * binomial(d - m.i, m.j)) as f64;
    Ok(multinomial * b[0].powi(m.i as i32) * b[1].powi(m.j as i32) * b[2].powi(m.k as i32))
}

/// Values of all Bernstein polynomials of degree `d` at `b`, in storage order.
pub fn bernstein_all(d: usize, b: [f64; 3]) -> Vec<f64> {
    // triangle of values built by repeated degree raising of the constant 1
    let mut vals = vec![0.0; basis_len(d)];
    vals[0] = 1.0;
    for l in 1..=d {
        // walk positions of degree l from last to first so sources of degree l-1 stay intact
        for r in (0..=l).rev() {
            for k in (0..=r).rev() {
                let j = r - k;
                let i = l - r;
                let mut v = 0.0;
                if i > 0 {
                    v += b[0] * vals[slot(j, k)];
                }
                if j > 0 {
                    v += b[1] * vals[slot(j - 1, k)];
                }
                if k > 0 {
                    v += b[2] * vals[slot(j, k - 1)];
                }
                vals[slot(j, k)] = v;
            }
        }
    }
    vals
}

/// A polynomial in B-form on a triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct BPolynomial {
    degree: usize,
    coeffs: Vec<f64>,
}

impl BPolynomial {
    pub fn new(degree: usize, coeffs: Vec<f64>) -> Result<Self, BernsteinError> {
        let expected = basis_len(degree);
        if coeffs.len() != expected {
            return Err(BernsteinError::CoefficientCount {
                degree,
                expected,
                found: coeffs.len(),
            });
        }
        Ok(Self { degree, coeffs })
    }

    pub fn constant(degree: usize, value: f64) -> Self {
        Self {
            degree,
            coeffs: vec![value; basis_len(degree)],
        }
    }

    pub fn zero(degree: usize) -> Self {
        Self::constant(degree, 0.0)
    }

    /// The Bernstein polynomial `B^d_m` itself.
    pub fn unit(m: MultiIndex) -> Self {
        let mut p = Self::zero(m.degree());
        p.coeffs[m.position()] = 1.0;
        p
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, m: MultiIndex) -> f64 {
        self.coeffs[m.position()]
    }

    /// Evaluates with the de Casteljau recurrence.
    pub fn de_casteljau(&self, b: [f64; 3]) -> f64 {
        de_casteljau_in_place(&mut self.coeffs.clone(), self.degree, b)
    }

    /// B-form of the derivative along a vector with directional coordinates `a`.
    pub fn dir_derivative(&self, a: [f64; 3]) -> Result<Self, BernsteinError> {
        if self.degree == 0 {
            return Err(BernsteinError::ZeroDegree);
        }
        let d = self.degree;
        let scale = d as f64;
        let mut out = Self::zero(d - 1);
        for r in 0..d {
            for k in 0..=r {
                let j = r - k;
                out.coeffs[slot(j, k)] = scale
                    * (a[0] * self.coeffs[slot(j, k)]
                        + a[1] * self.coeffs[slot(j + 1, k)]
                        + a[2] * self.coeffs[slot(j, k + 1)]);
            }
        }
        Ok(out)
    }

    /// Same polynomial written in degree `d + 1`.
    pub fn elevate(&self) -> Self {
        let d = self.degree;
        let mut out = Self::zero(d + 1);
        let inv = 1.0 / (d + 1) as f64;
        for m in multi_indices(d + 1) {
            let mut v = 0.0;
            if m.i > 0 {
                v += m.i as f64 * self.coeffs[slot(m.j, m.k)];
            }
            if m.j > 0 {
                v += m.j as f64 * self.coeffs[slot(m.j - 1, m.k)];
            }
            if m.k > 0 {
                v += m.k as f64 * self.coeffs[slot(m.j, m.k - 1)];
            }
            out.coeffs[m.position()] = v * inv;
        }
        out
    }

    fn elevate_to(&self, degree: usize) -> Self {
        let mut p = self.clone();
        while p.degree < degree {
            p = p.elevate();
        }
        p
    }

    /// Exact integral over a triangle of the given area.
    pub fn integral(&self, area: f64) -> f64 {
        area / binomial(self.degree + 2, 2) as f64 * self.coeffs.iter().sum::<f64>()
    }

    /// Exact `L2` inner product over a triangle of the given area. Operands
    /// of different degree are degree-raised to the larger one.
    pub fn inner_product(&self, other: &Self, area: f64) -> f64 {
        let d = self.degree.max(other.degree);
        let p = self.elevate_to(d);
        let q = other.elevate_to(d);
        let g = gram_matrix(d);
        let mut acc = 0.0;
        for (m, &cp) in p.coeffs.iter().enumerate() {
            if cp == 0.0 {
                continue;
            }
            let row = g.row(m);
            acc += cp
                * row
                    .iter()
                    .zip(&q.coeffs)
                    .map(|(gij, cq)| gij * cq)
                    .sum::<f64>();
        }
        acc * area
    }
}

fn de_casteljau_in_place(c: &mut [f64], d: usize, b: [f64; 3]) -> f64 {
    for l in (0..d).rev() {
        // reduce degree l+1 -> l; reads positions of row r+1 before they are overwritten
        for r in 0..=l {
            for k in 0..=r {
                let j = r - k;
                c[slot(j, k)] =
                    b[0] * c[slot(j, k)] + b[1] * c[slot(j + 1, k)] + b[2] * c[slot(j, k + 1)];
            }
        }
    }
    c[0]
}

/// Evaluates a B-form polynomial given by raw coefficients.
pub fn de_casteljau(degree: usize, coeffs: &[f64], b: [f64; 3]) -> f64 {
    debug_assert_eq!(coeffs.len(), basis_len(degree));
    de_casteljau_in_place(&mut coeffs.to_vec(), degree, b)
}

/// Inner products of Bernstein polynomials of degree `d` on a unit-area triangle.
pub fn gram_matrix(d: usize) -> DenseMatrix {
    let idx = multi_indices(d);
    let denom = (binomial(2 * d, d) * binomial(2 * d + 2, 2)) as f64;
    DenseMatrix::from_fn(idx.len(), idx.len(), |a, b| {
        let (m, n) = (idx[a], idx[b]);
        let num = binomial(m.i + n.i, m.i) * binomial(m.j + n.j, m.j) * binomial(m.k + n.k, m.k);
        num as f64 / denom
    })
}

/// Element mass, stiffness and roughness matrices of one triangle.
#[derive(Debug, Clone)]
pub struct ElementMatrices {
    pub mass: DenseMatrix,
    pub stiffness: DenseMatrix,
    pub roughness: DenseMatrix,
}

/// Degree-dependent tables shared by every triangle.
#[derive(Debug, Clone)]
pub struct ElementKernel {
    degree: usize,
    gram: DenseMatrix,
    gram_first: DenseMatrix,
    gram_second: Option<DenseMatrix>,
}

impl ElementKernel {
    pub fn new(degree: usize) -> Result<Self, BernsteinError> {
        if degree == 0 {
            return Err(BernsteinError::ZeroDegree);
        }
        if degree > MAX_DEGREE {
            return Err(BernsteinError::DegreeTooLarge(degree));
        }
        Ok(Self {
            degree,
            gram: gram_matrix(degree),
            gram_first: gram_matrix(degree - 1),
            gram_second: (degree >= 2).then(|| gram_matrix(degree - 2)),
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `M_T`, `K_T` and `R_T` for the triangle with the given vertices.
    ///
    /// Cartesian partial derivatives are taken as directional derivatives along
    /// the unit vectors, so the gradient and Laplacian of every Bernstein
    /// polynomial stay in B-form and the exact inner-product formula applies.
    pub fn matrices(&self, verts: [Point; 3]) -> Result<ElementMatrices, BernsteinError> {
        let e1 = [verts[1][0] - verts[0][0], verts[1][1] - verts[0][1]];
        let e2 = [verts[2][0] - verts[0][0], verts[2][1] - verts[0][1]];
        let area = 0.5 * (e1[0] * e2[1] - e1[1] * e2[0]).abs();
        let scale = (e1[0].powi(2) + e1[1].powi(2)).max(e2[0].powi(2) + e2[1].powi(2));
        if !(area > 1e-14 * scale) {
            return Err(BernsteinError::DegenerateTriangle(area));
        }
        let d = self.degree;
        let n = basis_len(d);
        let ax = directional_coords(verts, [1.0, 0.0]);
        let ay = directional_coords(verts, [0.0, 1.0]);

        let mut mass = self.gram.clone();
        mass.scale(area);

        let first = basis_len(d - 1);
        let mut dx = DenseMatrix::zeros(n, first);
        let mut dy = DenseMatrix::zeros(n, first);
        let mut lap = self
            .gram_second
            .as_ref()
            .map(|_| DenseMatrix::zeros(n, basis_len(d - 2)));
        for (row, m) in multi_indices(d).into_iter().enumerate() {
            let b = BPolynomial::unit(m);
            let px = b.dir_derivative(ax)?;
            let py = b.dir_derivative(ay)?;
            for c in 0..first {
                dx[(row, c)] = px.coeffs[c];
                dy[(row, c)] = py.coeffs[c];
            }
            if let Some(lap) = lap.as_mut() {
                let pxx = px.dir_derivative(ax)?;
                let pyy = py.dir_derivative(ay)?;
                for c in 0..pxx.coeffs.len() {
                    lap[(row, c)] = pxx.coeffs[c] + pyy.coeffs[c];
                }
            }
        }

        let mut stiffness = sandwich(&dx, &self.gram_first);
        let syy = sandwich(&dy, &self.gram_first);
        for i in 0..n {
            for j in 0..n {
                stiffness[(i, j)] = area * (stiffness[(i, j)] + syy[(i, j)]);
            }
        }
        symmetrize(&mut stiffness);

        let roughness = match (lap, &self.gram_second) {
            (Some(lap), Some(g)) => {
                let mut r = sandwich(&lap, g);
                r.scale(area);
                symmetrize(&mut r);
                r
            }
            _ => DenseMatrix::zeros(n, n),
        };

        Ok(ElementMatrices {
            mass,
            stiffness,
            roughness,
        })
    }
}

/// `M_T`, `K_T`, `R_T` for a single triangle. `R_T` is zero for `d = 1`.
pub fn local_matrices(d: usize, verts: [Point; 3]) -> Result<ElementMatrices, BernsteinError> {
    ElementKernel::new(d)?.matrices(verts)
}

// A G A^T
fn sandwich(a: &DenseMatrix, g: &DenseMatrix) -> DenseMatrix {
    a.matmul(g).matmul(&a.transpose())
}

fn symmetrize(m: &mut DenseMatrix) {
    for i in 0..m.rows() {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
