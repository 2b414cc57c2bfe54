//! GMRF precision matrices of the spline-discretized SPDE
//! `(kappa^2 - Laplacian)^{alpha/2} (tau x) = W`.
//!
//! * `alpha = 1`: `Q = tau^2 (kappa^2 M + K)`
//! * `alpha = 2`, Galerkin: `Q = tau^2 (kappa^4 M + 2 kappa^2 K + K M^{-1} K)`
//! * `alpha = 2`, least squares: `Q = tau^2 (kappa^4 M + 2 kappa^2 K + R)`
//! * `alpha >= 3`: `Q_a = kappa^4 Q_{a-2} + kappa^2 (Q_{a-2} M^{-1} K + K M^{-1} Q_{a-2}) + K M^{-1} Q_{a-2} M^{-1} K`,
//!   started from the `alpha = 1` or Galerkin `alpha = 2` matrix.
//!
//! With lumping, every `M` of the Galerkin and recursive forms is replaced by
//! its row-sum diagonal, which keeps `Q` sparse. The exact-mass mode solves
//! with `M` column by column and produces a dense matrix; it exists for
//! comparisons on small meshes.

pub mod matern;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

use crate::assembly::{assemble_all, lump, AssemblyError, SystemMatrices};
use crate::gmrf::{CholeskyFactor, GmrfError};
use crate::space::SplineSpace;
use crate::sparse::{CsrMatrix, SparseSymMatrix};

pub use matern::{matern_correlation, practical_range, sigma2_from_tau2, tau2_from_sigma2};

#[derive(Debug, Error, PartialEq)]
pub enum PrecisionError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("alpha must be at least 1, got {0}")]
    AlphaTooSmall(u32),
    #[error("variant {variant} cannot be used with alpha = {alpha}")]
    VariantMismatch { variant: Variant, alpha: u32 },
    #[error("the least-squares variant needs spline degree at least 2, got {0}")]
    LeastSquaresDegree(usize),
    #[error("the marginal variance is undefined for alpha = 1; give tau directly")]
    VarianceUndefined,
    #[error("field has {found} values, the space has {expected} basis functions")]
    FieldLength { expected: usize, found: usize },
    #[error("the non-stationary form supports the Galerkin and least-squares alpha = 2 variants, not {0}")]
    NonStationaryVariant(Variant),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("mass matrix factorization: {0}")]
    Mass(#[from] GmrfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Alpha1,
    Galerkin2,
    LeastSquares2,
    Recursive,
}

impl Variant {
    /// The variant used when only `alpha` is given.
    pub fn default_for(alpha: u32) -> Self {
        match alpha {
            1 => Self::Alpha1,
            2 => Self::Galerkin2,
            _ => Self::Recursive,
        }
    }

    pub fn check_alpha(self, alpha: u32) -> Result<(), PrecisionError> {
        let ok = match self {
            Self::Alpha1 => alpha == 1,
            Self::Galerkin2 | Self::LeastSquares2 => alpha == 2,
            Self::Recursive => alpha >= 3,
        };
        if ok {
            Ok(())
        } else {
            Err(PrecisionError::VariantMismatch {
                variant: self,
                alpha,
            })
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Alpha1 => "a1",
            Self::Galerkin2 => "g2",
            Self::LeastSquares2 => "ls2",
            Self::Recursive => "rec",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "a1" => Ok(Self::Alpha1),
            "g2" => Ok(Self::Galerkin2),
            "ls2" => Ok(Self::LeastSquares2),
            "rec" => Ok(Self::Recursive),
            other => Err(format!(
                "unknown variant '{other}' (expected a1, g2, ls2 or rec)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionSpec {
    pub variant: Variant,
    /// Replace `M` by its lumped diagonal in the Galerkin and recursive forms.
    pub lumped: bool,
}

impl PrecisionSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            lumped: true,
        }
    }

    pub fn exact_mass(variant: Variant) -> Self {
        Self {
            variant,
            lumped: false,
        }
    }
}

/// Matérn-type parameters on the SPDE scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternParams {
    alpha: u32,
    kappa: f64,
    tau: f64,
}

fn positive(name: &'static str, value: f64) -> Result<f64, PrecisionError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(PrecisionError::NonPositive { name, value })
    }
}

impl MaternParams {
    pub fn with_tau(alpha: u32, kappa: f64, tau: f64) -> Result<Self, PrecisionError> {
        if alpha == 0 {
            return Err(PrecisionError::AlphaTooSmall(alpha));
        }
        Ok(Self {
            alpha,
            kappa: positive("kappa", kappa)?,
            tau: positive("tau", tau)?,
        })
    }

    /// Derives `tau` from the marginal variance; needs `alpha >= 2`.
    pub fn with_sigma2(alpha: u32, kappa: f64, sigma2: f64) -> Result<Self, PrecisionError> {
        if alpha == 0 {
            return Err(PrecisionError::AlphaTooSmall(alpha));
        }
        if alpha == 1 {
            return Err(PrecisionError::VarianceUndefined);
        }
        let kappa = positive("kappa", kappa)?;
        let sigma2 = positive("sigma2", sigma2)?;
        let tau2 = tau2_from_sigma2(kappa, f64::from(alpha - 1), sigma2);
        Self::with_tau(alpha, kappa, tau2.sqrt())
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Smoothness `nu = alpha - 1` in two dimensions.
    pub fn nu(&self) -> u32 {
        self.alpha - 1
    }

    pub fn sigma2(&self) -> Option<f64> {
        (self.alpha >= 2)
            .then(|| sigma2_from_tau2(self.kappa, f64::from(self.nu()), self.tau * self.tau))
    }

    pub fn range(&self) -> Option<f64> {
        (self.alpha >= 2).then(|| practical_range(self.kappa, f64::from(self.nu())))
    }

    /// Matérn covariance at distance `r`.
    pub fn covariance(&self, r: f64) -> Result<f64, PrecisionError> {
        let sigma2 = self.sigma2().ok_or(PrecisionError::VarianceUndefined)?;
        Ok(sigma2 * matern_correlation(self.nu(), self.kappa * r))
    }
}

enum MassInverse<'a> {
    Lumped(&'a [f64]),
    Exact(&'a CholeskyFactor),
}

impl MassInverse<'_> {
    /// `A M^{-1} B` for full (both-triangle) matrices.
    fn between(&self, a: &CsrMatrix, b: &CsrMatrix) -> CsrMatrix {
        match self {
            Self::Lumped(m) => {
                let inv: Vec<f64> = m.iter().map(|v| 1.0 / v).collect();
                a.scale_cols(&inv).matmul(b)
            }
            Self::Exact(f) => {
                let bt = b.transpose();
                let n = b.rows();
                let cols: Vec<Vec<f64>> = (0..bt.rows())
                    .map(|j| {
                        let mut col = vec![0.0; n];
                        let (idx, val) = bt.row(j);
                        for (&i, &v) in idx.iter().zip(val) {
                            col[i] = v;
                        }
                        col
                    })
                    .collect();
                let solved = f.solve_many(&cols).expect("dimensions agree");
                let mut trip = Vec::new();
                for (j, y) in solved.iter().enumerate() {
                    for (i, v) in a.mul_vec(y).into_iter().enumerate() {
                        if v != 0.0 {
                            trip.push((i, j, v));
                        }
                    }
                }
                CsrMatrix::from_triplets(a.rows(), b.cols(), &trip)
            }
        }
    }
}

/// `(X + X') / 2` stored as a symmetric matrix.
fn symmetric_part(x: &CsrMatrix) -> SparseSymMatrix {
    let s = x.add_scaled(0.5, &x.transpose(), 0.5);
    SparseSymMatrix::from_csr_lower(&s)
}

/// Caches `M`, `K`, `R`, the lumped mass and the `K M^{-1} K` products of one
/// space so repeated builds with new parameters only rescale and add.
pub struct PrecisionBuilder {
    degree: usize,
    matrices: SystemMatrices,
    lumped_mass: Vec<f64>,
    stiffness_full: CsrMatrix,
    kmk_lumped: OnceLock<SparseSymMatrix>,
    mass_factor: OnceLock<Result<CholeskyFactor, GmrfError>>,
    kmk_exact: OnceLock<SparseSymMatrix>,
}

impl PrecisionBuilder {
    pub fn new(space: &SplineSpace) -> Result<Self, PrecisionError> {
        Self::from_matrices(space.degree(), assemble_all(space)?)
    }

    pub fn from_matrices(degree: usize, matrices: SystemMatrices) -> Result<Self, PrecisionError> {
        let lumped_mass = lump(&matrices.mass)?;
        let stiffness_full = matrices.stiffness.to_full();
        Ok(Self {
            degree,
            matrices,
            lumped_mass,
            stiffness_full,
            kmk_lumped: OnceLock::new(),
            mass_factor: OnceLock::new(),
            kmk_exact: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrices.mass.n()
    }

    pub fn matrices(&self) -> &SystemMatrices {
        &self.matrices
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    fn mass_factor(&self) -> Result<&CholeskyFactor, PrecisionError> {
        self.mass_factor
            .get_or_init(|| CholeskyFactor::factorize(&self.matrices.mass))
            .as_ref()
            .map_err(|e| PrecisionError::Mass(e.clone()))
    }

    fn mass_inverse(&self, lumped: bool) -> Result<MassInverse<'_>, PrecisionError> {
        Ok(if lumped {
            MassInverse::Lumped(&self.lumped_mass)
        } else {
            MassInverse::Exact(self.mass_factor()?)
        })
    }

    fn mass(&self, lumped: bool) -> SparseSymMatrix {
        if lumped {
            SparseSymMatrix::from_diagonal(&self.lumped_mass)
        } else {
            self.matrices.mass.clone()
        }
    }

    /// `K M^{-1} K` with lumped or exact `M`.
    pub fn kmk(&self, lumped: bool) -> Result<&SparseSymMatrix, PrecisionError> {
        let cell = if lumped {
            &self.kmk_lumped
        } else {
            &self.kmk_exact
        };
        if let Some(v) = cell.get() {
            return Ok(v);
        }
        let k = &self.stiffness_full;
        let prod = self.mass_inverse(lumped)?.between(k, k);
        Ok(cell.get_or_init(|| symmetric_part(&prod)))
    }

    fn check_spec(&self, alpha: u32, spec: PrecisionSpec) -> Result<(), PrecisionError> {
        spec.variant.check_alpha(alpha)?;
        if spec.variant == Variant::LeastSquares2 && self.degree < 2 {
            return Err(PrecisionError::LeastSquaresDegree(self.degree));
        }
        Ok(())
    }

    /// Stationary precision matrix.
    pub fn build(
        &self,
        params: &MaternParams,
        spec: PrecisionSpec,
    ) -> Result<SparseSymMatrix, PrecisionError> {
        self.check_spec(params.alpha(), spec)?;
        let k2 = params.kappa() * params.kappa();
        let tau2 = params.tau() * params.tau();
        let unscaled = match spec.variant {
            Variant::Alpha1 => self.base(1, k2, spec.lumped)?,
            Variant::Galerkin2 => self.base(2, k2, spec.lumped)?,
            Variant::LeastSquares2 => self
                .matrices
                .mass
                .add_scaled(k2 * k2, &self.matrices.stiffness, 2.0 * k2)
                .add_scaled(1.0, &self.matrices.roughness, 1.0),
            Variant::Recursive => self.recursive(params.alpha(), k2, spec.lumped)?,
        };
        Ok(unscaled.scaled(tau2))
    }

    // alpha = 1 always uses the exact mass matrix
    fn base(&self, alpha: u32, k2: f64, lumped: bool) -> Result<SparseSymMatrix, PrecisionError> {
        let k = &self.matrices.stiffness;
        Ok(if alpha == 1 {
            self.matrices.mass.add_scaled(k2, k, 1.0)
        } else {
            self.mass(lumped)
                .add_scaled(k2 * k2, k, 2.0 * k2)
                .add_scaled(1.0, self.kmk(lumped)?, 1.0)
        })
    }

    fn recursive(
        &self,
        alpha: u32,
        k2: f64,
        lumped: bool,
    ) -> Result<SparseSymMatrix, PrecisionError> {
        let minv = self.mass_inverse(lumped)?;
        let k = &self.stiffness_full;
        let mut q = self.base(if alpha % 2 == 1 { 1 } else { 2 }, k2, lumped)?;
        let mut level = 2 - alpha % 2;
        while level < alpha {
            let qf = q.to_full();
            let cross = minv.between(&qf, k);
            let sym_cross = cross.add_scaled(1.0, &cross.transpose(), 1.0);
            let inner = minv.between(&minv.between(k, &qf), k);
            let next = qf
                .add_scaled(k2 * k2, &sym_cross, k2)
                .add_scaled(1.0, &inner, 1.0);
            q = symmetric_part(&next);
            level += 2;
        }
        Ok(q)
    }

    /// Non-stationary precision with `kappa^2` and `tau` given at each basis
    /// function's domain point:
    /// `T (k2 M k2 + k2 K + K k2 + K M^{-1} K) T` (Galerkin) or with `R` in place
    /// of `K M^{-1} K` (least squares), where `T` and `k2` are diagonal.
    pub fn build_nonstationary(
        &self,
        kappa2: &[f64],
        tau: &[f64],
        spec: PrecisionSpec,
    ) -> Result<SparseSymMatrix, PrecisionError> {
        let n = self.dim();
        for field in [kappa2, tau] {
            if field.len() != n {
                return Err(PrecisionError::FieldLength {
                    expected: n,
                    found: field.len(),
                });
            }
        }
        if let Some(&v) = kappa2.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(PrecisionError::NonPositive {
                name: "kappa^2",
                value: v,
            });
        }
        if let Some(&v) = tau.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(PrecisionError::NonPositive {
                name: "tau",
                value: v,
            });
        }
        let last = match spec.variant {
            Variant::Galerkin2 => self.kmk(spec.lumped)?.clone(),
            Variant::LeastSquares2 => {
                self.check_spec(2, spec)?;
                self.matrices.roughness.clone()
            }
            other => return Err(PrecisionError::NonStationaryVariant(other)),
        };
        let mass_lumped = spec.lumped && spec.variant == Variant::Galerkin2;
        let mass_term = self.mass(mass_lumped).congruence_diag(kappa2);
        let trip: Vec<_> = self
            .matrices
            .stiffness
            .iter_lower()
            .map(|(i, j, v)| (i, j, v * (kappa2[i] + kappa2[j])))
            .collect();
        let cross = SparseSymMatrix::from_triplets(n, &trip);
        let inner = mass_term
            .add_scaled(1.0, &cross, 1.0)
            .add_scaled(1.0, &last, 1.0);
        Ok(inner.congruence_diag(tau))
    }
}

/// One-shot stationary build.
pub fn build_precision(
    space: &SplineSpace,
    params: &MaternParams,
    spec: PrecisionSpec,
) -> Result<SparseSymMatrix, PrecisionError> {
    PrecisionBuilder::new(space)?.build(params, spec)
}
