//! Compressed sparse row storage.
//!
//! [`CsrMatrix`] is a general rectangular matrix used for observation and
//! scatter operators and for intermediate products. [`SparseSymMatrix`]
//! keeps only the lower triangle (diagonal included) of a symmetric matrix.

use crate::dense::DenseMatrix;

/// Entries with magnitude below this are dropped when compressing.
pub const DROP_TOLERANCE: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed in input order.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        // stable: duplicates keep their input order, which fixes the summation order
        order.sort_by_key(|&p| (triplets[p].0, triplets[p].1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        let mut q = 0;
        while q < order.len() {
            let (r, c, _) = triplets[order[q]];
            assert!(
                r < rows && c < cols,
                "triplet ({r}, {c}) outside {rows}x{cols}"
            );
            let mut v = 0.0;
            while q < order.len() && (triplets[order[q]].0, triplets[order[q]].1) == (r, c) {
                v += triplets[order[q]].2;
                q += 1;
            }
            if v.abs() >= DROP_TOLERANCE {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, val) = self.row(i);
        idx.binary_search(&j).map(|p| val[p]).unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (idx, val) = self.row(i);
            idx.iter().zip(val).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let (idx, val) = self.row(i);
                idx.iter().zip(val).map(|(&j, v)| v * x[j]).sum()
            })
            .collect()
    }

    /// `A^T x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (&j, v) in idx.iter().zip(val) {
                out[j] += v * x[i];
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                indices[next[j]] = i;
                data[next[j]] = v;
                next[j] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            indptr: counts,
            indices,
            data,
        }
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut indptr = Vec::with_capacity(self.rows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut acc = vec![0.0; other.cols];
        let mut mark = vec![usize::MAX; other.cols];
        let mut touched = Vec::new();
        for i in 0..self.rows {
            touched.clear();
            let (ia, va) = self.row(i);
            for (&l, &a) in ia.iter().zip(va) {
                let (ib, vb) = other.row(l);
                for (&j, &b) in ib.iter().zip(vb) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j].abs() >= DROP_TOLERANCE {
                    indices.push(j);
                    data.push(acc[j]);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: self.rows,
            cols: other.cols,
            indptr,
            indices,
            data,
        }
    }

    /// `alpha * self + beta * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut indptr = Vec::with_capacity(self.rows + 1);
        indptr.push(0);
        let mut indices = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut data = Vec::with_capacity(self.nnz().max(other.nnz()));
        for i in 0..self.rows {
            let (ia, va) = self.row(i);
            let (ib, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ia.len() || q < ib.len() {
                let (j, v) = match (ia.get(p), ib.get(q)) {
                    (Some(&ja), Some(&jb)) if ja == jb => {
                        p += 1;
                        q += 1;
                        (ja, alpha * va[p - 1] + beta * vb[q - 1])
                    }
                    (Some(&ja), Some(&jb)) if ja < jb => {
                        p += 1;
                        (ja, alpha * va[p - 1])
                    }
                    (Some(&ja), None) => {
                        p += 1;
                        (ja, alpha * va[p - 1])
                    }
                    (_, Some(&jb)) => {
                        q += 1;
                        (jb, beta * vb[q - 1])
                    }
                    (None, None) => unreachable!(),
                };
                if v.abs() >= DROP_TOLERANCE {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            data,
        }
    }

    /// `diag(s) * self`.
    pub fn scale_rows(&self, s: &[f64]) -> Self {
        assert_eq!(s.len(), self.rows);
        let mut out = self.clone();
        for i in 0..self.rows {
            for p in out.indptr[i]..out.indptr[i + 1] {
                out.data[p] *= s[i];
            }
        }
        out
    }

    /// `self * diag(s)`.
    pub fn scale_cols(&self, s: &[f64]) -> Self {
        assert_eq!(s.len(), self.cols);
        let mut out = self.clone();
        for (v, &j) in out.data.iter_mut().zip(&self.indices) {
            *v *= s[j];
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.iter() {
            d[(i, j)] = v;
        }
        d
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut trip = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m[(i, j)] != 0.0 {
                    trip.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), &trip)
    }
}

/// Symmetric matrix stored as the lower triangle in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    lower: CsrMatrix,
}

impl SparseSymMatrix {
    /// Entries above the diagonal are mirrored below it before duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let lowered: Vec<_> = triplets
            .iter()
            .map(|&(i, j, v)| (i.max(j), i.min(j), v))
            .collect();
        Self {
            lower: CsrMatrix::from_triplets(n, n, &lowered),
        }
    }

    /// Keeps the lower triangle of a matrix assumed symmetric.
    pub fn from_csr_lower(m: &CsrMatrix) -> Self {
        assert_eq!(m.rows(), m.cols(), "matrix must be square");
        let trip: Vec<_> = m.iter().filter(|&(i, j, _)| j <= i).collect();
        Self {
            lower: CsrMatrix::from_triplets(m.rows(), m.rows(), &trip),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            lower: CsrMatrix::identity(n),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let trip: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), &trip)
    }

    pub fn n(&self) -> usize {
        self.lower.rows()
    }

    /// Number of stored (lower-triangle) entries.
    pub fn nnz_lower(&self) -> usize {
        self.lower.nnz()
    }

    /// The stored lower triangle.
    pub fn lower(&self) -> &CsrMatrix {
        &self.lower
    }

    /// Stored entries `(i, j, v)` with `j <= i`.
    pub fn iter_lower(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.lower.iter()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower.get(i.max(j), i.min(j))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n());
        let mut y = vec![0.0; self.n()];
        for (i, j, v) in self.lower.iter() {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        y
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mul_vec(&vec![1.0; self.n()])
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.lower.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `alpha * self + beta * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        Self {
            lower: self.lower.add_scaled(alpha, &other.lower, beta),
        }
    }

    /// `D A D` for a diagonal `D`.
    pub fn congruence_diag(&self, d: &[f64]) -> Self {
        Self {
            lower: self.lower.scale_rows(d).scale_cols(d),
        }
    }

    /// Both triangles as a general CSR matrix.
    pub fn to_full(&self) -> CsrMatrix {
        let mut trip = Vec::with_capacity(2 * self.nnz_lower());
        for (i, j, v) in self.lower.iter() {
            trip.push((i, j, v));
            if i != j {
                trip.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.n(), self.n(), &trip)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.to_full().to_dense()
    }

    /// Lower triangle of a dense matrix, ignoring exact zeros.
    pub fn from_dense_lower(m: &DenseMatrix) -> Self {
        let mut trip = Vec::new();
        for i in 0..m.rows() {
            for j in 0..=i {
                if m[(i, j)] != 0.0 {
                    trip.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.rows(), &trip)
    }
}
