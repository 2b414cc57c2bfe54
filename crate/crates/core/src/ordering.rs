//! Fill-reducing orderings for sparse Cholesky.
//!
//! Approximate minimum degree from the `amd` crate, a port of the
//! SuiteSparse routine. It is deterministic for a given sparsity pattern.

use crate::sparse::SparseSymMatrix;

/// `perm[k]` is the original index placed at position `k`.
pub fn minimum_degree(a: &SparseSymMatrix) -> Vec<usize> {
    let n = a.n();
    if n == 0 {
        return Vec::new();
    }
    // a symmetric pattern in CSR is also its own CSC
    let full = a.to_full();
    let mut ptr = Vec::with_capacity(n + 1);
    let mut idx = Vec::with_capacity(full.nnz());
    ptr.push(0usize);
    for i in 0..n {
        idx.extend_from_slice(full.row(i).0);
        ptr.push(idx.len());
    }
    match amd::order(n, &ptr, &idx, &amd::Control::default()) {
        Ok((perm, _, _)) => perm,
        // only reachable for malformed input; the natural order is always valid
        Err(_) => (0..n).collect(),
    }
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}
