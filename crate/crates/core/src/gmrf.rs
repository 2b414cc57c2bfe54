//! Sparse Cholesky factorization of GMRF precision matrices.
//!
//! `P Q P' = L L'` with `P` from [`minimum_degree`]. The numeric phase is an
//! up-looking row-by-row factorization driven by the elimination tree; `L` is
//! stored by columns with the diagonal first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::ordering::{inverse_permutation, minimum_degree};
use crate::sparse::{CsrMatrix, SparseSymMatrix};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GmrfError {
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("vector has length {found}, matrix dimension is {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Seeded generator used for every sample drawn by this crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal vector drawn with the ziggurat sampler of `rand_distr`.
pub fn standard_normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

impl CholeskyFactor {
    pub fn factorize(q: &SparseSymMatrix) -> Result<Self, GmrfError> {
        let perm = minimum_degree(q);
        Self::factorize_with(q, perm)
    }

    /// Factorizes `P Q P'` for a caller-supplied ordering.
    pub fn factorize_with(q: &SparseSymMatrix, perm: Vec<usize>) -> Result<Self, GmrfError> {
        let n = q.n();
        assert_eq!(
            perm.len(),
            n,
            "ordering length differs from matrix dimension"
        );
        let pinv = inverse_permutation(&perm);
        let trip: Vec<_> = q
            .iter_lower()
            .map(|(i, j, v)| {
                let (a, b) = (pinv[i], pinv[j]);
                (a.max(b), a.min(b), v)
            })
            .collect();
        // row k of the permuted lower triangle is column k of its upper triangle
        let c = CsrMatrix::from_triplets(n, n, &trip);

        let parent = etree(&c);
        let mut stack = vec![0usize; n];
        let mut mark = vec![NONE; n];

        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut stack, &mut mark);
            for &i in &stack[top..] {
                counts[i] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            col_ptr[k + 1] = col_ptr[k] + counts[k];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut next = col_ptr[..n].to_vec();
        let mut x = vec![0.0; n];
        mark.iter_mut().for_each(|m| *m = NONE);

        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut stack, &mut mark);
            let (cols, vals) = c.row(k);
            for (&i, &v) in cols.iter().zip(vals) {
                x[i] = v;
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..next[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                row_idx[next[i]] = k;
                values[next[i]] = lki;
                next[i] += 1;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(GmrfError::NotPositiveDefinite {
                    row: perm[k],
                    pivot: d,
                });
            }
            row_idx[next[k]] = k;
            values[next[k]] = d.sqrt();
            next[k] += 1;
        }

        Ok(Self {
            n,
            perm,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `perm[k]` is the original index at factor position `k`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Stored entries of `L`, diagonal included.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries `(i, j, L_ij)` of the factor in permuted numbering.
    pub fn factor_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1])
                .map(move |p| (self.row_idx[p], j, self.values[p]))
        })
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n)
            .map(|j| self.values[self.col_ptr[j]].ln())
            .sum::<f64>()
    }

    fn check(&self, v: &[f64]) -> Result<(), GmrfError> {
        if v.len() != self.n {
            return Err(GmrfError::DimensionMismatch {
                expected: self.n,
                found: v.len(),
            });
        }
        Ok(())
    }

    // L y = y in place
    fn forward(&self, y: &mut [f64]) {
        for j in 0..self.n {
            let start = self.col_ptr[j];
            y[j] /= self.values[start];
            let yj = y[j];
            for p in start + 1..self.col_ptr[j + 1] {
                y[self.row_idx[p]] -= self.values[p] * yj;
            }
        }
    }

    // L' y = y in place
    fn backward(&self, y: &mut [f64]) {
        for j in (0..self.n).rev() {
            let start = self.col_ptr[j];
            let mut s = y[j];
            for p in start + 1..self.col_ptr[j + 1] {
                s -= self.values[p] * y[self.row_idx[p]];
            }
            y[j] = s / self.values[start];
        }
    }

    /// Solves `Q x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, GmrfError> {
        self.check(b)?;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        self.forward(&mut y);
        self.backward(&mut y);
        let mut x = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        Ok(x)
    }

    /// Independent right-hand sides, solved in parallel.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, GmrfError> {
        rhs.par_iter().map(|b| self.solve(b)).collect()
    }

    /// `a' Q^{-1} a` for a sparse vector given as `(index, value)` pairs.
    pub fn inverse_quadratic_form(&self, a: &[(usize, f64)]) -> f64 {
        let pinv = inverse_permutation(&self.perm);
        let mut y = vec![0.0; self.n];
        for &(i, v) in a {
            y[pinv[i]] += v;
        }
        self.forward(&mut y);
        y.iter().map(|v| v * v).sum()
    }

    /// `P' L^{-T} z` for a given standard normal `z`.
    pub fn sample_from_normals(&self, z: &[f64]) -> Result<Vec<f64>, GmrfError> {
        self.check(z)?;
        let mut y = z.to_vec();
        self.backward(&mut y);
        let mut w = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            w[p] = y[k];
        }
        Ok(w)
    }

    /// Zero-mean draw with covariance `Q^{-1}`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let z = standard_normal_vec(rng, self.n);
        self.sample_from_normals(&z)
            .expect("length matches by construction")
    }

    pub fn sample_seeded(&self, seed: u64) -> Vec<f64> {
        self.sample(&mut rng_from_seed(seed))
    }
}

// elimination tree of a matrix given by its upper triangle by columns
fn etree(c: &CsrMatrix) -> Vec<usize> {
    let n = c.rows();
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &col in c.row(k).0 {
            let mut i = col;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

// nonzero pattern of row k of L (excluding the diagonal) in stack[top..], topologically ordered
fn ereach(
    c: &CsrMatrix,
    k: usize,
    parent: &[usize],
    stack: &mut [usize],
    mark: &mut [usize],
) -> usize {
    let n = c.rows();
    let mut top = n;
    mark[k] = k;
    for &col in c.row(k).0 {
        let mut i = col;
        if i >= k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            top -= 1;
            len -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(f: &CholeskyFactor) -> Vec<Vec<f64>> {
        let n = f.n();
        let mut l = vec![vec![0.0; n]; n];
        for (i, j, v) in f.factor_entries() {
            l[i][j] = v;
        }
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| l[i][k] * l[j][k]).sum();
                a[f.perm[i]][f.perm[j]] = v;
            }
        }
        a
    }

    #[test]
    fn identity_and_diagonal() {
        let f = CholeskyFactor::factorize(&SparseSymMatrix::identity(4)).unwrap();
        assert!(f.factor_entries().all(|(i, j, v)| i == j && v == 1.0));
        assert_eq!(f.log_det(), 0.0);
        let f = CholeskyFactor::factorize(&SparseSymMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        let mut diag: Vec<_> = f
            .factor_entries()
            .map(|(i, _, v)| (f.permutation()[i], v))
            .collect();
        diag.sort_by_key(|e| e.0);
        assert_eq!(diag, vec![(0, 2.0), (1, 3.0)]);
        assert!((f.log_det() - 36f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn single_triangle_q1_reconstructs() {
        let mut t = Vec::new();
        let k = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..=i {
                let m = if i == j { 2.0 / 24.0 } else { 1.0 / 24.0 };
                t.push((i, j, m + k[i][j]));
            }
        }
        let q = SparseSymMatrix::from_triplets(3, &t);
        let f = CholeskyFactor::factorize(&q).unwrap();
        let r = reconstruct(&f);
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[i][j] - q.get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_indefinite() {
        let q = SparseSymMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(
            CholeskyFactor::factorize(&q),
            Err(GmrfError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn solves() {
        let n = 30;
        let mut t: Vec<_> = (0..n).map(|i| (i, i, 4.0)).collect();
        t.extend((1..n).map(|i| (i, i - 1, -1.0)));
        t.extend((7..n).map(|i| (i, i - 7, -0.5)));
        let q = SparseSymMatrix::from_triplets(n, &t);
        let f = CholeskyFactor::factorize(&q).unwrap();
        assert_eq!(f.solve(&vec![0.0; n]).unwrap(), vec![0.0; n]);
        let x = f.solve(&q.row_sums()).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(matches!(
            f.solve(&[1.0]),
            Err(GmrfError::DimensionMismatch { .. })
        ));
        let e3 = f
            .solve(&(0..n).map(|i| (i == 3) as u8 as f64).collect::<Vec<_>>())
            .unwrap();
        let e5 = f
            .solve(&(0..n).map(|i| (i == 5) as u8 as f64).collect::<Vec<_>>())
            .unwrap();
        let quad = f.inverse_quadratic_form(&[(3, 1.0), (5, -2.0)]);
        assert!((quad - (e3[3] - 2.0 * e3[5] - 2.0 * e5[3] + 4.0 * e5[5])).abs() < 1e-14);
    }

    #[test]
    fn seeded_samples_repeat() {
        let q = SparseSymMatrix::from_diagonal(&[4.0; 10]);
        let f = CholeskyFactor::factorize(&q).unwrap();
        assert_eq!(f.sample_seeded(7), f.sample_seeded(7));
        assert_ne!(f.sample_seeded(7), f.sample_seeded(8));
    }

    #[test]
    fn monte_carlo_variances() {
        for (diag, expect) in [(1.0, 1.0), (4.0, 0.25)] {
            let f = CholeskyFactor::factorize(&SparseSymMatrix::from_diagonal(&[diag])).unwrap();
            let mut rng = rng_from_seed(11);
            let draws: Vec<f64> = (0..100_000).map(|_| f.sample(&mut rng)[0]).collect();
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let var =
                draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
            assert!(
                (var / expect - 1.0).abs() < 0.03,
                "var {var} expected {expect}"
            );
        }
    }
}
