//! Global mass, stiffness and roughness matrices and mass lumping.
//!
//! Element blocks are scatter-added through the space's local-to-global map,
//! which equals `C' blockdiag(M_T) C` without forming `C`. Element blocks may
//! be computed on worker threads, but they are always reduced in triangle
//! order so the result is bitwise identical to a serial build.

use rayon::prelude::*;
use thiserror::Error;

use crate::bernstein::{BernsteinError, ElementKernel, ElementMatrices};
use crate::space::SplineSpace;
use crate::sparse::SparseSymMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum AssemblyError {
    #[error("element matrices of triangle {triangle}: {source}")]
    Element {
        triangle: usize,
        #[source]
        source: BernsteinError,
    },
    #[error("lumped mass entry {index} is {value:e}; lumping needs positive row sums")]
    NonPositiveLumped { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Mass,
    Stiffness,
    Roughness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threading {
    Serial,
    #[default]
    Parallel,
}

/// `M`, `K` and `R` of one spline space.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub mass: SparseSymMatrix,
    pub stiffness: SparseSymMatrix,
    pub roughness: SparseSymMatrix,
}

impl SystemMatrices {
    pub fn get(&self, kind: MatrixKind) -> &SparseSymMatrix {
        match kind {
            MatrixKind::Mass => &self.mass,
            MatrixKind::Stiffness => &self.stiffness,
            MatrixKind::Roughness => &self.roughness,
        }
    }
}

fn element_blocks(
    space: &SplineSpace,
    threading: Threading,
) -> Result<Vec<ElementMatrices>, AssemblyError> {
    let kernel = ElementKernel::new(space.degree()).map_err(|source| AssemblyError::Element {
        triangle: 0,
        source,
    })?;
    let mesh = space.mesh();
    let one = |t: usize| {
        kernel
            .matrices(mesh.triangle_points(t))
            .map_err(|source| AssemblyError::Element {
                triangle: t,
                source,
            })
    };
    match threading {
        Threading::Serial => (0..mesh.num_triangles()).map(one).collect(),
        Threading::Parallel => (0..mesh.num_triangles()).into_par_iter().map(one).collect(),
    }
}

fn scatter(space: &SplineSpace, blocks: &[ElementMatrices], kind: MatrixKind) -> SparseSymMatrix {
    let n = space.local_len();
    let mut trip = Vec::with_capacity(blocks.len() * n * (n + 1) / 2);
    for (t, block) in blocks.iter().enumerate() {
        let local = match kind {
            MatrixKind::Mass => &block.mass,
            MatrixKind::Stiffness => &block.stiffness,
            MatrixKind::Roughness => &block.roughness,
        };
        let dofs = space.triangle_dofs(t);
        for a in 0..n {
            for b in 0..n {
                if dofs[b] <= dofs[a] {
                    trip.push((dofs[a], dofs[b], local[(a, b)]));
                }
            }
        }
    }
    SparseSymMatrix::from_triplets(space.dim(), &trip)
}

pub fn assemble(space: &SplineSpace, kind: MatrixKind) -> Result<SparseSymMatrix, AssemblyError> {
    Ok(scatter(
        space,
        &element_blocks(space, Threading::default())?,
        kind,
    ))
}

pub fn assemble_all(space: &SplineSpace) -> Result<SystemMatrices, AssemblyError> {
    assemble_all_with(space, Threading::default())
}

pub fn assemble_all_with(
    space: &SplineSpace,
    threading: Threading,
) -> Result<SystemMatrices, AssemblyError> {
    let blocks = element_blocks(space, threading)?;
    Ok(SystemMatrices {
        mass: scatter(space, &blocks, MatrixKind::Mass),
        stiffness: scatter(space, &blocks, MatrixKind::Stiffness),
        roughness: scatter(space, &blocks, MatrixKind::Roughness),
    })
}

/// Diagonal of the lumped mass matrix, `M~_ii = sum_j M_ij`.
pub fn lump(mass: &SparseSymMatrix) -> Result<Vec<f64>, AssemblyError> {
    let sums = mass.row_sums();
    if let Some((index, &value)) = sums.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(AssemblyError::NonPositiveLumped { index, value });
    }
    Ok(sums)
}
