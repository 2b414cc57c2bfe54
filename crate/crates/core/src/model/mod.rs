//! Gaussian observation model on top of a spline GMRF prior.
//!
//! `y_i = b_0 + x(s_i) + e_i` with `x(s) = sum_h w_h psi_h(s)`,
//! `w ~ N(0, Q^{-1})`, `e_i ~ N(0, sigma_e^2)` and an optional intercept `b_0`
//! carrying a nearly flat `N(0, 1e8)` prior. For fixed hyperparameters the
//! posterior is exact; hyperparameters are fitted by maximizing the marginal
//! likelihood.

pub mod field;
pub mod fit;

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::gmrf::{CholeskyFactor, GmrfError};
use crate::mesh::Point;
use crate::precision::PrecisionError;
use crate::space::SplineSpace;
use crate::sparse::{CsrMatrix, SparseSymMatrix};

pub use field::{BSplineBasis, ParamField};
pub use fit::{
    fit_hyperparameters, FitOptions, FitResult, NonStationaryModel, PrecisionModel, StationaryModel,
};

/// Prior precision of the intercept coefficient.
pub const INTERCEPT_PRECISION: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("location {index} at ({x}, {y}) lies outside the mesh")]
    OutsideDomain { index: usize, x: f64, y: f64 },
    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("noise variance must be positive and finite, got {0}")]
    NoiseVariance(f64),
    #[error("need at least {needed} observations, found {found}")]
    TooFewObservations { needed: usize, found: usize },
    #[error("point ({x}, {y}) lies outside the parameter field's knot domain")]
    FieldOutsideKnots { x: f64, y: f64 },
    #[error("invalid parameter field: {0}")]
    InvalidField(String),
    #[error("every optimizer start failed; last error: {0}")]
    AllStartsFailed(String),
    #[error(transparent)]
    Precision(#[from] PrecisionError),
    #[error(transparent)]
    Factorization(#[from] GmrfError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub locations: Vec<Point>,
    pub values: Vec<f64>,
}

impl Observations {
    pub fn new(locations: Vec<Point>, values: Vec<f64>) -> Result<Self, ModelError> {
        if locations.len() != values.len() {
            return Err(ModelError::LengthMismatch {
                what: "observation values",
                expected: locations.len(),
                found: values.len(),
            });
        }
        Ok(Self { locations, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `A_ih = psi_h(s_i)`.
pub fn observation_matrix(
    space: &SplineSpace,
    locations: &[Point],
) -> Result<CsrMatrix, ModelError> {
    let rows: Vec<_> = locations
        .par_iter()
        .enumerate()
        .map(|(index, &p)| {
            space.eval_basis(p).map_err(|_| ModelError::OutsideDomain {
                index,
                x: p[0],
                y: p[1],
            })
        })
        .collect::<Result<_, _>>()?;
    let trip: Vec<_> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.entries.iter().map(move |&(h, v)| (i, h, v)))
        .collect();
    Ok(CsrMatrix::from_triplets(
        locations.len(),
        space.dim(),
        &trip,
    ))
}

fn check_noise(noise_variance: f64) -> Result<(), ModelError> {
    if noise_variance > 0.0 && noise_variance.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NoiseVariance(noise_variance))
    }
}

/// Prior and observation matrix with the intercept column appended when requested.
fn augment(q: &SparseSymMatrix, a: &CsrMatrix, intercept: bool) -> (SparseSymMatrix, CsrMatrix) {
    if !intercept {
        return (q.clone(), a.clone());
    }
    let n = q.n();
    let mut qt: Vec<_> = q.iter_lower().collect();
    qt.push((n, n, INTERCEPT_PRECISION));
    let mut at: Vec<_> = a.iter().collect();
    at.extend((0..a.rows()).map(|i| (i, n, 1.0)));
    (
        SparseSymMatrix::from_triplets(n + 1, &qt),
        CsrMatrix::from_triplets(a.rows(), n + 1, &at),
    )
}

/// `Q + A'A / sigma^2`.
fn posterior_precision(q: &SparseSymMatrix, a: &CsrMatrix, noise_variance: f64) -> SparseSymMatrix {
    let ata = SparseSymMatrix::from_csr_lower(&a.transpose().matmul(a));
    q.add_scaled(1.0, &ata, 1.0 / noise_variance)
}

#[derive(Debug, Clone)]
pub struct Posterior {
    latent_dim: usize,
    intercept: bool,
    noise_variance: f64,
    mean: Vec<f64>,
    factor: CholeskyFactor,
}

/// Which standard deviation `predict` reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdKind {
    None,
    /// Posterior sd of `b_0 + x(s)`.
    Latent,
    /// Latent sd with the observation noise added.
    Predictive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub sd: Option<Vec<f64>>,
}

pub fn condition(
    q: &SparseSymMatrix,
    a: &CsrMatrix,
    y: &[f64],
    noise_variance: f64,
    intercept: bool,
) -> Result<Posterior, ModelError> {
    check_noise(noise_variance)?;
    if a.cols() != q.n() {
        return Err(ModelError::LengthMismatch {
            what: "observation matrix columns",
            expected: q.n(),
            found: a.cols(),
        });
    }
    if y.len() != a.rows() {
        return Err(ModelError::LengthMismatch {
            what: "observation values",
            expected: a.rows(),
            found: y.len(),
        });
    }
    let (qa, aa) = augment(q, a, intercept);
    let factor = CholeskyFactor::factorize(&posterior_precision(&qa, &aa, noise_variance))?;
    let rhs: Vec<f64> = aa
        .tr_mul_vec(y)
        .into_iter()
        .map(|v| v / noise_variance)
        .collect();
    let mean = factor.solve(&rhs)?;
    Ok(Posterior {
        latent_dim: q.n(),
        intercept,
        noise_variance,
        mean,
        factor,
    })
}

impl Posterior {
    /// Posterior mean of the spline weights.
    pub fn weights(&self) -> &[f64] {
        &self.mean[..self.latent_dim]
    }

    pub fn intercept(&self) -> Option<f64> {
        self.intercept.then(|| self.mean[self.latent_dim])
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Mean and variance of `b_0 + a' w` for a sparse row `a`.
    pub fn moments(&self, row: &[(usize, f64)]) -> (f64, f64) {
        let mut a = row.to_vec();
        if self.intercept {
            a.push((self.latent_dim, 1.0));
        }
        let mean = a.iter().map(|&(h, v)| self.mean[h] * v).sum();
        (mean, self.factor.inverse_quadratic_form(&a))
    }

    pub fn predict(
        &self,
        space: &SplineSpace,
        points: &[Point],
        sd: SdKind,
    ) -> Result<Prediction, ModelError> {
        let rows = observation_matrix(space, points)?;
        let moments: Vec<(f64, f64)> = (0..points.len())
            .into_par_iter()
            .map(|i| {
                let (idx, val) = rows.row(i);
                let row: Vec<_> = idx.iter().copied().zip(val.iter().copied()).collect();
                if sd == SdKind::None {
                    (
                        row.iter().map(|&(h, v)| self.mean[h] * v).sum::<f64>()
                            + self.intercept().unwrap_or(0.0),
                        0.0,
                    )
                } else {
                    self.moments(&row)
                }
            })
            .collect();
        let mean = moments.iter().map(|m| m.0).collect();
        let sd = match sd {
            SdKind::None => None,
            SdKind::Latent => Some(moments.iter().map(|m| m.1.sqrt()).collect()),
            SdKind::Predictive => Some(
                moments
                    .iter()
                    .map(|m| (m.1 + self.noise_variance).sqrt())
                    .collect(),
            ),
        };
        Ok(Prediction { mean, sd })
    }
}

/// `log N(y; 0, A Q^{-1} A' + sigma^2 I)` through the precision-form identity.
pub fn log_marginal_likelihood(
    q: &SparseSymMatrix,
    a: &CsrMatrix,
    y: &[f64],
    noise_variance: f64,
    intercept: bool,
) -> Result<f64, ModelError> {
    let post = condition(q, a, y, noise_variance, intercept)?;
    let (qa, _) = augment(q, a, intercept);
    let prior = CholeskyFactor::factorize(&qa)?;
    let n = y.len() as f64;
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let (_, aa) = augment(q, a, intercept);
    let rhs: Vec<f64> = aa
        .tr_mul_vec(y)
        .into_iter()
        .map(|v| v / noise_variance)
        .collect();
    // mu' Q_post mu = mu' A' y / sigma^2
    let quad: f64 = post.mean.iter().zip(&rhs).map(|(m, r)| m * r).sum();
    Ok(0.5
        * (prior.log_det()
            - post.factor.log_det()
            - n * (2.0 * PI * noise_variance).ln()
            - yy / noise_variance
            + quad))
}

/// Negative mean log leave-one-out predictive density, by brute-force refits.
pub fn loo_log_score(
    q: &SparseSymMatrix,
    a: &CsrMatrix,
    y: &[f64],
    noise_variance: f64,
    intercept: bool,
) -> Result<f64, ModelError> {
    let n = y.len();
    if n < 2 {
        return Err(ModelError::TooFewObservations {
            needed: 2,
            found: n,
        });
    }
    let terms: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let trip: Vec<_> = a
                .iter()
                .filter(|e| e.0 != i)
                .map(|(r, c, v)| (if r > i { r - 1 } else { r }, c, v))
                .collect();
            let a_rest = CsrMatrix::from_triplets(n - 1, a.cols(), &trip);
            let y_rest: Vec<f64> = y
                .iter()
                .enumerate()
                .filter(|e| e.0 != i)
                .map(|e| *e.1)
                .collect();
            let post = condition(q, &a_rest, &y_rest, noise_variance, intercept)?;
            let (idx, val) = a.row(i);
            let row: Vec<_> = idx.iter().copied().zip(val.iter().copied()).collect();
            let (m, v) = post.moments(&row);
            let var = v + noise_variance;
            Ok(0.5 * (2.0 * PI * var).ln() + 0.5 * (y[i] - m).powi(2) / var)
        })
        .collect::<Result<_, ModelError>>()?;
    Ok(terms.iter().sum::<f64>() / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mse: f64,
    /// `sqrt(MSE)`.
    pub rmse: f64,
    /// `sqrt(sum (yhat - y)^2)` without the `1/n`.
    pub rmse_paper: f64,
}

pub fn metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics, ModelError> {
    if y_true.len() != y_pred.len() {
        return Err(ModelError::LengthMismatch {
            what: "predictions",
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(ModelError::TooFewObservations {
            needed: 1,
            found: 0,
        });
    }
    let sse: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let mse = sse / y_true.len() as f64;
    Ok(Metrics {
        mse,
        rmse: mse.sqrt(),
        rmse_paper: sse.sqrt(),
    })
}
