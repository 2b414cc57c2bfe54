//! Maximum-likelihood hyperparameter fitting.
//!
//! The search runs Nelder–Mead over the model's log-scale parameters plus
//! `log sigma_e^2`, then restarts from the best point perturbed by seeded
//! Gaussian noise. Parameter vectors whose precision matrix fails to build
//! or factorize score `-inf`.

use rand_distr::{Distribution, Normal};

use crate::gmrf::rng_from_seed;
use crate::mesh::Point;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::precision::{MaternParams, PrecisionBuilder, PrecisionSpec};
use crate::space::SplineSpace;
use crate::sparse::{CsrMatrix, SparseSymMatrix};

use super::{log_marginal_likelihood, ModelError, ParamField};

/// Maps an unconstrained parameter vector to a prior precision matrix.
pub trait PrecisionModel: Sync {
    fn num_params(&self) -> usize;
    fn precision(&self, theta: &[f64]) -> Result<SparseSymMatrix, ModelError>;
}

/// `theta = [log kappa, log tau]` at fixed `alpha` and variant.
pub struct StationaryModel<'a> {
    pub builder: &'a PrecisionBuilder,
    pub alpha: u32,
    pub spec: PrecisionSpec,
}

impl StationaryModel<'_> {
    pub fn params(&self, theta: &[f64]) -> Result<MaternParams, ModelError> {
        Ok(MaternParams::with_tau(
            self.alpha,
            theta[0].exp(),
            theta[1].exp(),
        )?)
    }

    pub fn theta(params: &MaternParams) -> Vec<f64> {
        vec![params.kappa().ln(), params.tau().ln()]
    }
}

impl PrecisionModel for StationaryModel<'_> {
    fn num_params(&self) -> usize {
        2
    }

    fn precision(&self, theta: &[f64]) -> Result<SparseSymMatrix, ModelError> {
        Ok(self.builder.build(&self.params(theta)?, self.spec)?)
    }
}

/// `theta` stacks the coefficients of the log `kappa^2` field and then those
/// of the log `tau` field; both fields are evaluated at the domain points.
pub struct NonStationaryModel<'a> {
    pub builder: &'a PrecisionBuilder,
    pub kappa2: ParamField,
    pub tau: ParamField,
    pub spec: PrecisionSpec,
    points: Vec<Point>,
}

impl<'a> NonStationaryModel<'a> {
    pub fn new(
        builder: &'a PrecisionBuilder,
        space: &SplineSpace,
        kappa2: ParamField,
        tau: ParamField,
        spec: PrecisionSpec,
    ) -> Self {
        let points = space.domain_points().iter().map(|p| p.location).collect();
        Self {
            builder,
            kappa2,
            tau,
            spec,
            points,
        }
    }

    /// The two fields with coefficients taken from `theta`.
    pub fn fields(&self, theta: &[f64]) -> Result<(ParamField, ParamField), ModelError> {
        let nk = self.kappa2.num_coefficients();
        if theta.len() != self.num_params() {
            return Err(ModelError::LengthMismatch {
                what: "field coefficients",
                expected: self.num_params(),
                found: theta.len(),
            });
        }
        Ok((
            self.kappa2.with_theta(&theta[..nk])?,
            self.tau.with_theta(&theta[nk..])?,
        ))
    }

    pub fn theta(&self) -> Vec<f64> {
        let mut t = self.kappa2.theta().to_vec();
        t.extend_from_slice(self.tau.theta());
        t
    }
}

impl PrecisionModel for NonStationaryModel<'_> {
    fn num_params(&self) -> usize {
        self.kappa2.num_coefficients() + self.tau.num_coefficients()
    }

    fn precision(&self, theta: &[f64]) -> Result<SparseSymMatrix, ModelError> {
        let (k2f, tf) = self.fields(theta)?;
        let k2: Vec<f64> = self
            .points
            .iter()
            .map(|&p| k2f.value(p))
            .collect::<Result<_, _>>()?;
        let tau: Vec<f64> = self
            .points
            .iter()
            .map(|&p| tf.value(p))
            .collect::<Result<_, _>>()?;
        Ok(self.builder.build_nonstationary(&k2, &tau, self.spec)?)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub seed: u64,
    pub restarts: usize,
    /// Standard deviation of the restart perturbation in log-parameter units.
    pub restart_spread: f64,
    pub intercept: bool,
    pub simplex: NelderMeadOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            restarts: 3,
            restart_spread: 0.5,
            intercept: false,
            simplex: NelderMeadOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Model parameters, without the noise term.
    pub theta: Vec<f64>,
    pub noise_variance: f64,
    pub log_likelihood: f64,
    /// Log-likelihood at the initial point (`-inf` if it failed).
    pub initial_log_likelihood: f64,
    pub evaluations: usize,
}

pub fn fit_hyperparameters(
    model: &dyn PrecisionModel,
    a: &CsrMatrix,
    y: &[f64],
    init_theta: &[f64],
    init_noise_variance: f64,
    opts: FitOptions,
) -> Result<FitResult, ModelError> {
    if y.len() < 3 {
        return Err(ModelError::TooFewObservations {
            needed: 3,
            found: y.len(),
        });
    }
    if init_theta.len() != model.num_params() {
        return Err(ModelError::LengthMismatch {
            what: "initial parameters",
            expected: model.num_params(),
            found: init_theta.len(),
        });
    }
    let p = init_theta.len();
    let mut last_error: Option<String> = None;
    let mut objective = |x: &[f64]| -> f64 {
        let result = model
            .precision(&x[..p])
            .and_then(|q| log_marginal_likelihood(&q, a, y, x[p].exp(), opts.intercept));
        match result {
            Ok(v) if v.is_finite() => -v,
            Ok(_) => f64::INFINITY,
            Err(e) => {
                last_error = Some(e.to_string());
                f64::INFINITY
            }
        }
    };

    let mut x0 = init_theta.to_vec();
    x0.push(init_noise_variance.ln());
    let initial = -objective(&x0);
    let mut best = nelder_mead(&mut objective, &x0, opts.simplex);
    let mut evaluations = best.evaluations + 1;

    let mut rng = rng_from_seed(opts.seed);
    let normal = Normal::new(0.0, opts.restart_spread).expect("spread is finite and non-negative");
    for _ in 0..opts.restarts {
        let start: Vec<f64> = best.x.iter().map(|v| v + normal.sample(&mut rng)).collect();
        let run = nelder_mead(&mut objective, &start, opts.simplex);
        evaluations += run.evaluations;
        if run.value < best.value {
            best = run;
        }
    }

    if !best.value.is_finite() {
        return Err(ModelError::AllStartsFailed(
            last_error.unwrap_or_else(|| "non-finite likelihood".into()),
        ));
    }
    Ok(FitResult {
        theta: best.x[..p].to_vec(),
        noise_variance: best.x[p].exp(),
        log_likelihood: -best.value,
        initial_log_likelihood: initial,
        evaluations,
    })
}
