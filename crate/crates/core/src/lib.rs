//! Stochastic PDE Gaussian fields discretized with continuous bivariate
//! splines in Bernstein–Bézier form.
//!
//! The pipeline runs bottom-up: a [`mesh::Triangulation`], the spline space
//! over it ([`space::SplineSpace`]), the assembled mass, stiffness and
//! roughness matrices ([`assembly`]), GMRF precision matrices
//! ([`precision`]), sparse Cholesky factorization and sampling ([`gmrf`]) and
//! the Gaussian observation model with likelihood-based fitting ([`model`]).

pub mod assembly;
pub mod bernstein;
pub mod dense;
pub mod gmrf;
pub mod matrix_market;
pub mod mesh;
pub mod model;
pub mod optim;
pub mod ordering;
pub mod precision;
pub mod projection;
pub mod quadrature;
pub mod space;
pub mod sparse;

use thiserror::Error;

/// Any error raised by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Bernstein(#[from] bernstein::BernsteinError),
    #[error(transparent)]
    Space(#[from] space::SpaceError),
    #[error(transparent)]
    Assembly(#[from] assembly::AssemblyError),
    #[error(transparent)]
    Precision(#[from] precision::PrecisionError),
    #[error(transparent)]
    Gmrf(#[from] gmrf::GmrfError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    MatrixMarket(#[from] matrix_market::MatrixMarketError),
}
