//! Refinement study: fit noisy grid samples of an analytic surface on a
//! sequence of uniformly refined meshes and record the prediction MSE.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use clap::Args;
use spline_spde::gmrf::{rng_from_seed, standard_normal_vec};
use spline_spde::mesh::{Point, Triangulation};
use spline_spde::model::{
    condition, fit_hyperparameters, metrics, observation_matrix, FitOptions, SdKind,
    StationaryModel,
};
use spline_spde::precision::{
    tau2_from_sigma2, MaternParams, PrecisionBuilder, PrecisionSpec, Variant,
};
use spline_spde::space::SplineSpace;

use crate::error::CliError;
use crate::input::Grid;
use crate::output::{ensure_dir, fmt, write_csv};

/// Half-width of the square study domain.
const HALF_WIDTH: f64 = 2.0;
const OBSERVATION_STEP: f64 = 0.2;
const EVALUATION_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    /// `2 sin(x) cos(y)`
    SinCos,
    /// `2 exp(-(x^2 + y^2) / s)`
    Gaussian(f64),
}

impl Surface {
    pub fn eval(self, p: Point) -> f64 {
        match self {
            Self::SinCos => 2.0 * p[0].sin() * p[1].cos(),
            Self::Gaussian(s) => 2.0 * (-(p[0] * p[0] + p[1] * p[1]) / s).exp(),
        }
    }
}

impl FromStr for Surface {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sincos" => Ok(Self::SinCos),
            "gauss2" => Ok(Self::Gaussian(2.0)),
            "gauss1" => Ok(Self::Gaussian(1.0)),
            "gauss0.5" => Ok(Self::Gaussian(0.5)),
            other => Err(format!(
                "unknown surface '{other}' (expected sincos, gauss2, gauss1 or gauss0.5)"
            )),
        }
    }
}

#[derive(Args)]
pub struct ConvergeArgs {
    /// sincos, gauss2, gauss1 or gauss0.5.
    #[arg(long, default_value = "sincos")]
    surface: Surface,
    /// Comma-separated spline degrees.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2])]
    degree: Vec<usize>,
    /// Number of refinement levels.
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Uniform refinements of the two-triangle base mesh before the first level.
    #[arg(long, default_value_t = 0)]
    start: usize,
    /// SPDE exponent alpha.
    #[arg(long, default_value_t = 2)]
    alpha: u32,
    /// Precision form: a1, g2, ls2 or rec (default follows alpha).
    #[arg(long)]
    variant: Option<Variant>,
    /// Variance of the noise added to the grid samples.
    #[arg(long, default_value_t = 1e-4)]
    noise_var: f64,
    /// Seed of the observation noise.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write converge.csv to this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub struct Row {
    pub level: usize,
    pub degree: usize,
    pub variant: Variant,
    pub mesh_size: f64,
    pub dim: usize,
    pub mse: f64,
    pub seconds: f64,
}

fn grid(step: f64) -> Vec<Point> {
    Grid::new(-HALF_WIDTH, HALF_WIDTH, -HALF_WIDTH, HALF_WIDTH, step)
        .expect("fixed study grid is valid")
        .points()
}

fn validate(args: &ConvergeArgs) -> Result<PrecisionSpec, CliError> {
    let variant = args.variant.unwrap_or(Variant::default_for(args.alpha));
    variant.check_alpha(args.alpha)?;
    if args.alpha == 1 {
        return Err(CliError::validation(
            "the study needs alpha >= 2 to set a marginal variance",
        ));
    }
    if let Some(&d) = args
        .degree
        .iter()
        .find(|&&d| d == 0 || d > spline_spde::bernstein::MAX_DEGREE)
    {
        return Err(CliError::validation(format!("degree {d} is out of range")));
    }
    if variant == Variant::LeastSquares2 && args.degree.iter().any(|&d| d < 2) {
        return Err(CliError::validation(
            "the least-squares variant needs every degree >= 2",
        ));
    }
    if !(args.noise_var > 0.0 && args.noise_var.is_finite()) {
        return Err(CliError::validation(format!(
            "--noise-var must be positive, got {}",
            args.noise_var
        )));
    }
    if args.levels == 0 {
        return Err(CliError::validation("--levels must be at least 1"));
    }
    Ok(PrecisionSpec::new(variant))
}

pub fn study(args: &ConvergeArgs) -> Result<Vec<Row>, CliError> {
    let spec = validate(args)?;
    let locations = grid(OBSERVATION_STEP);
    let noise = standard_normal_vec(&mut rng_from_seed(args.seed), locations.len());
    let sd = args.noise_var.sqrt();
    let y: Vec<f64> = locations
        .iter()
        .zip(&noise)
        .map(|(&p, e)| args.surface.eval(p) + sd * e)
        .collect();
    let targets = grid(EVALUATION_STEP);
    let truth: Vec<f64> = targets.iter().map(|&p| args.surface.eval(p)).collect();

    let mut mesh = Triangulation::structured_rectangle(
        -HALF_WIDTH,
        HALF_WIDTH,
        -HALF_WIDTH,
        HALF_WIDTH,
        1,
        1,
    )?;
    for _ in 0..args.start {
        mesh = mesh.refine_uniform();
    }
    let mut rows = Vec::new();
    for level in 0..args.levels {
        let mesh_arc = Arc::new(mesh.clone());
        for &d in &args.degree {
            let start = Instant::now();
            let space = SplineSpace::new(mesh_arc.clone(), d)?;
            let builder = PrecisionBuilder::new(&space)?;
            let a = observation_matrix(&space, &locations)?;
            let model = StationaryModel {
                builder: &builder,
                alpha: args.alpha,
                spec,
            };
            // range of a quarter of the domain width, unit variance
            let kappa = (8.0 * f64::from(args.alpha - 1)).sqrt() / HALF_WIDTH;
            let tau = tau2_from_sigma2(kappa, f64::from(args.alpha - 1), 1.0).sqrt();
            let init = StationaryModel::theta(&MaternParams::with_tau(args.alpha, kappa, tau)?);
            let opts = FitOptions {
                seed: args.seed,
                ..Default::default()
            };
            let fit = fit_hyperparameters(&model, &a, &y, &init, args.noise_var, opts)?;
            let q = builder.build(&model.params(&fit.theta)?, spec)?;
            let post = condition(&q, &a, &y, fit.noise_variance, false)?;
            let pred = post.predict(&space, &targets, SdKind::None)?;
            rows.push(Row {
                level,
                degree: d,
                variant: spec.variant,
                mesh_size: mesh.mesh_size(),
                dim: space.dim(),
                mse: metrics(&truth, &pred.mean)?.mse,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        mesh = mesh.refine_uniform();
    }
    Ok(rows)
}

pub fn run(args: &ConvergeArgs) -> Result<(), CliError> {
    let rows = study(args)?;
    let header = [
        "level",
        "d",
        "variant",
        "mesh_size",
        "dim",
        "mse",
        "wall_time_s",
    ];
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.level.to_string(),
                r.degree.to_string(),
                r.variant.to_string(),
                fmt(r.mesh_size),
                r.dim.to_string(),
                fmt(r.mse),
                format!("{:.3}", r.seconds),
            ]
        })
        .collect();
    println!("{}", header.join(","));
    for r in &records {
        println!("{}", r.join(","));
    }
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_csv(&dir.join("converge.csv"), &header, records)?;
    }
    Ok(())
}
