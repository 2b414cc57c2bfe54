//! Subcommand implementations.

use std::path::Path;
use std::sync::Arc;

use spline_spde::assembly::assemble_all;
use spline_spde::gmrf::{rng_from_seed, CholeskyFactor};
use spline_spde::model::{
    condition, fit_hyperparameters, loo_log_score, observation_matrix, FitOptions,
    NonStationaryModel, Observations, ParamField, Posterior, PrecisionModel, SdKind,
    StationaryModel,
};
use spline_spde::precision::{
    tau2_from_sigma2, MaternParams, PrecisionBuilder, PrecisionError, PrecisionSpec, Variant,
};
use spline_spde::space::{dimension_formula, SplineSpace};
use spline_spde::sparse::SparseSymMatrix;

use crate::error::CliError;
use crate::input::{read_mesh, read_observations, Grid};
use crate::output::{ensure_dir, fmt, write_csv, write_gnuplot, write_matrix, write_report};
use crate::{
    AssembleArgs, CvArgs, DataArgs, FitArgs, MeshInfoArgs, PredictArgs, PriorArgs, SampleArgs,
    SpaceArgs,
};

fn positive(name: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::validation(format!(
            "--{name} must be positive, got {x}"
        ))),
        _ => Ok(()),
    }
}

impl PriorArgs {
    /// Checks every prior setting against `degree` without building anything.
    pub(crate) fn validate(&self, degree: usize) -> Result<PrecisionSpec, CliError> {
        if self.alpha == 0 {
            return Err(PrecisionError::AlphaTooSmall(0).into());
        }
        let variant = self.variant.unwrap_or(Variant::default_for(self.alpha));
        variant.check_alpha(self.alpha)?;
        if variant == Variant::LeastSquares2 && degree < 2 {
            return Err(PrecisionError::LeastSquaresDegree(degree).into());
        }
        positive("kappa", self.kappa)?;
        positive("tau", self.tau)?;
        positive("sigma2", self.sigma2)?;
        if self.sigma2.is_some() && self.alpha == 1 {
            return Err(PrecisionError::VarianceUndefined.into());
        }
        Ok(PrecisionSpec {
            variant,
            lumped: self.lumped,
        })
    }

    fn given_params(&self) -> Result<Option<MaternParams>, CliError> {
        Ok(match (self.kappa, self.tau, self.sigma2) {
            (Some(k), Some(t), _) => Some(MaternParams::with_tau(self.alpha, k, t)?),
            (Some(k), None, Some(s)) => Some(MaternParams::with_sigma2(self.alpha, k, s)?),
            _ => None,
        })
    }

    fn required_params(&self) -> Result<MaternParams, CliError> {
        self.given_params()?.ok_or_else(|| {
            CliError::validation("fixed hyperparameters need --kappa and one of --tau or --sigma2")
        })
    }
}

fn load_space(args: &SpaceArgs) -> Result<SplineSpace, CliError> {
    let mesh = read_mesh(&args.mesh)?;
    Ok(SplineSpace::new(Arc::new(mesh), args.degree)?)
}

fn noise_variance(data: &DataArgs) -> Result<f64, CliError> {
    positive("noise-var", data.noise_var)?;
    data.noise_var
        .ok_or_else(|| CliError::validation("--noise-var is required"))
}

fn export_q(path: Option<&Path>, q: &SparseSymMatrix) -> Result<(), CliError> {
    if let Some(p) = path {
        write_matrix(p, q)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

pub fn mesh_info(args: &MeshInfoArgs) -> Result<(), CliError> {
    let mesh = read_mesh(&args.mesh)?;
    let (lo, hi) = mesh.bounding_box();
    let (v, e, t) = (mesh.num_vertices(), mesh.num_edges(), mesh.num_triangles());
    println!("vertices = {v}");
    println!("edges = {e}");
    println!("triangles = {t}");
    println!("boundary_edges = {}", mesh.num_boundary_edges());
    println!("euler_characteristic = {}", mesh.euler_characteristic());
    println!("mesh_size = {}", fmt(mesh.mesh_size()));
    println!("area = {}", fmt(mesh.total_area()));
    println!(
        "bounding_box = {}:{}:{}:{}",
        fmt(lo[0]),
        fmt(hi[0]),
        fmt(lo[1]),
        fmt(hi[1])
    );
    let degrees = match args.degree {
        Some(d) => {
            // reuse the space's range check
            SplineSpace::new(Arc::new(mesh.clone()), d)?;
            d..=d
        }
        None => 1..=5,
    };
    for d in degrees {
        println!("dimension_d{d} = {}", dimension_formula(v, e, t, d));
    }
    Ok(())
}

pub fn assemble(args: &AssembleArgs) -> Result<(), CliError> {
    let spec = args.prior.validate(args.space.degree)?;
    let params = match &args.export_q {
        Some(_) => Some(args.prior.required_params()?),
        None => None,
    };
    let space = load_space(&args.space)?;
    ensure_dir(&args.out)?;
    let m = assemble_all(&space)?;
    for (name, mat) in [
        ("mass", &m.mass),
        ("stiffness", &m.stiffness),
        ("roughness", &m.roughness),
    ] {
        write_matrix(&args.out.join(format!("{name}.mtx")), mat)?;
    }
    let builder = PrecisionBuilder::from_matrices(space.degree(), m)?;
    let lumped = builder
        .lumped_mass()
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), fmt(*v)]);
    write_csv(
        &args.out.join("lumped_mass.csv"),
        &["index", "value"],
        lumped,
    )?;
    println!("dimension = {}", space.dim());
    println!("wrote {}", args.out.display());
    if let Some(p) = params {
        export_q(args.export_q.as_deref(), &builder.build(&p, spec)?)?;
    }
    Ok(())
}

/// Field values on a grid; points outside the mesh get `NaN`.
fn grid_rows(
    space: &SplineSpace,
    grid: &Grid,
    eval: impl Fn(&[[f64; 2]]) -> Result<Vec<Vec<f64>>, CliError>,
) -> Result<Vec<Vec<String>>, CliError> {
    let points = grid.points();
    let inside: Vec<bool> = points.iter().map(|&p| space.locate(p).is_ok()).collect();
    let kept: Vec<[f64; 2]> = points
        .iter()
        .zip(&inside)
        .filter(|e| *e.1)
        .map(|e| *e.0)
        .collect();
    let values = eval(&kept)?;
    let width = values.first().map_or(0, Vec::len);
    let mut it = values.into_iter();
    Ok(points
        .iter()
        .zip(&inside)
        .map(|(p, &ok)| {
            let mut row = vec![fmt(p[0]), fmt(p[1])];
            match ok {
                true => row.extend(
                    it.next()
                        .expect("one value row per kept point")
                        .into_iter()
                        .map(fmt),
                ),
                false => row.extend((0..width.max(1)).map(|_| fmt(f64::NAN))),
            }
            row
        })
        .collect())
}

pub fn sample(args: &SampleArgs) -> Result<(), CliError> {
    let spec = args.prior.validate(args.space.degree)?;
    let params = args.prior.required_params()?;
    let space = load_space(&args.space)?;
    ensure_dir(&args.out)?;
    let q = PrecisionBuilder::new(&space)?.build(&params, spec)?;
    let factor = CholeskyFactor::factorize(&q)?;
    let w = factor.sample(&mut rng_from_seed(args.seed));
    let rows = space
        .domain_points()
        .iter()
        .zip(&w)
        .enumerate()
        .map(|(i, (dp, v))| {
            vec![
                i.to_string(),
                fmt(dp.location[0]),
                fmt(dp.location[1]),
                fmt(*v),
            ]
        });
    write_csv(
        &args.out.join("weights.csv"),
        &["index", "x", "y", "weight"],
        rows,
    )?;
    if let Some(grid) = &args.grid {
        let rows = grid_rows(&space, grid, |pts| {
            pts.iter()
                .map(|&p| Ok(vec![space.eval_spline(&w, p)?]))
                .collect()
        })?;
        write_csv(&args.out.join("field.csv"), &["x", "y", "value"], rows)?;
        write_gnuplot(&args.out, "field.csv", 3, "sampled field")?;
    }
    println!("dimension = {}", space.dim());
    println!("wrote {}", args.out.display());
    export_q(args.export_q.as_deref(), &q)
}

fn write_posterior(
    dir: &Path,
    space: &SplineSpace,
    post: &Posterior,
    grid: &Grid,
    predictive: bool,
) -> Result<(), CliError> {
    let kind = if predictive {
        SdKind::Predictive
    } else {
        SdKind::Latent
    };
    let rows = grid_rows(space, grid, |pts| {
        let pred = post.predict(space, pts, kind)?;
        let sd = pred.sd.expect("sd requested");
        Ok(pred
            .mean
            .into_iter()
            .zip(sd)
            .map(|(m, s)| vec![m, s])
            .collect())
    })?;
    write_csv(&dir.join("posterior.csv"), &["x", "y", "mean", "sd"], rows)?;
    write_gnuplot(dir, "posterior.csv", 3, "posterior mean")?;
    Ok(())
}

fn load_data(
    space_args: &SpaceArgs,
    data: &DataArgs,
) -> Result<(SplineSpace, Observations), CliError> {
    let space = load_space(space_args)?;
    let obs = read_observations(&data.obs, &space)?;
    Ok((space, obs))
}

pub fn predict(args: &PredictArgs) -> Result<(), CliError> {
    let spec = args.prior.validate(args.space.degree)?;
    let params = args.prior.required_params()?;
    let noise = noise_variance(&args.data)?;
    let (space, obs) = load_data(&args.space, &args.data)?;
    ensure_dir(&args.out)?;
    let q = PrecisionBuilder::new(&space)?.build(&params, spec)?;
    let a = observation_matrix(&space, &obs.locations)?;
    let post = condition(&q, &a, &obs.values, noise, args.data.intercept)?;
    write_posterior(&args.out, &space, &post, &args.grid, args.predictive_sd)?;
    println!("wrote {}", args.out.display());
    export_q(args.export_q.as_deref(), &q)
}

pub fn cv(args: &CvArgs) -> Result<(), CliError> {
    let spec = args.prior.validate(args.space.degree)?;
    let params = args.prior.required_params()?;
    let noise = noise_variance(&args.data)?;
    let (space, obs) = load_data(&args.space, &args.data)?;
    let q = PrecisionBuilder::new(&space)?.build(&params, spec)?;
    let a = observation_matrix(&space, &obs.locations)?;
    let score = loo_log_score(&q, &a, &obs.values, noise, args.data.intercept)?;
    println!("log_score = {}", fmt(score));
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_report(
            &dir.join("cv.txt"),
            &[
                ("observations".into(), obs.len().to_string()),
                ("log_score".into(), fmt(score)),
            ],
        )?;
    }
    Ok(())
}

/// Starting kappa and tau: given values, else a range of a fifth of the
/// bounding-box diagonal and the data variance as marginal variance.
fn initial_params(
    prior: &PriorArgs,
    space: &SplineSpace,
    y: &[f64],
) -> Result<MaternParams, CliError> {
    if let Some(p) = prior.given_params()? {
        return Ok(p);
    }
    let (lo, hi) = space.mesh().bounding_box();
    let diag = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
    let kappa = prior.kappa.unwrap_or(8f64.sqrt() / (0.2 * diag));
    if prior.alpha == 1 {
        return Ok(MaternParams::with_tau(1, kappa, prior.tau.unwrap_or(1.0))?);
    }
    let v = variance(y);
    let sigma2 = prior.sigma2.unwrap_or(if v > 0.0 { v } else { 1.0 });
    let tau = tau2_from_sigma2(kappa, f64::from(prior.alpha - 1), sigma2).sqrt();
    Ok(MaternParams::with_tau(prior.alpha, kappa, tau)?)
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let spec = args.prior.validate(args.space.degree)?;
    if args.nonstat.is_some()
        && !matches!(spec.variant, Variant::Galerkin2 | Variant::LeastSquares2)
    {
        return Err(PrecisionError::NonStationaryVariant(spec.variant).into());
    }
    positive("noise-var", args.data.noise_var)?;
    let (space, obs) = load_data(&args.space, &args.data)?;
    let init = initial_params(&args.prior, &space, &obs.values)?;
    let init_noise = args.data.noise_var.unwrap_or_else(|| {
        let v = variance(&obs.values) / 10.0;
        if v > 0.0 {
            v
        } else {
            0.01
        }
    });
    ensure_dir(&args.out)?;

    let builder = PrecisionBuilder::new(&space)?;
    let a = observation_matrix(&space, &obs.locations)?;
    let opts = FitOptions {
        seed: args.seed,
        intercept: args.data.intercept,
        ..Default::default()
    };
    let stationary = StationaryModel {
        builder: &builder,
        alpha: init.alpha(),
        spec,
    };
    let nonstationary = match args.nonstat {
        Some(ns) => {
            let (lo, hi) = space.mesh().bounding_box();
            let k2 = ParamField::constant(lo, hi, ns.kappa.0, ns.kappa.1, 2.0 * init.kappa().ln())?;
            let tau = ParamField::constant(lo, hi, ns.tau.0, ns.tau.1, init.tau().ln())?;
            Some(NonStationaryModel::new(&builder, &space, k2, tau, spec))
        }
        None => None,
    };
    let (model, theta0): (&dyn PrecisionModel, Vec<f64>) = match &nonstationary {
        Some(m) => (m, m.theta()),
        None => (&stationary, StationaryModel::theta(&init)),
    };
    let result = fit_hyperparameters(model, &a, &obs.values, &theta0, init_noise, opts)?;
    let q = model.precision(&result.theta)?;
    let post = condition(
        &q,
        &a,
        &obs.values,
        result.noise_variance,
        args.data.intercept,
    )?;

    let mut report: Vec<(String, String)> = vec![
        ("degree".into(), space.degree().to_string()),
        ("dimension".into(), space.dim().to_string()),
        ("alpha".into(), init.alpha().to_string()),
        ("variant".into(), spec.variant.to_string()),
        ("lumped".into(), spec.lumped.to_string()),
        ("observations".into(), obs.len().to_string()),
    ];
    match &nonstationary {
        Some(m) => {
            let (k2, tau) = m.fields(&result.theta)?;
            let join = |t: &[f64]| t.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(" ");
            report.push(("log_kappa2_coefficients".into(), join(k2.theta())));
            report.push(("log_tau_coefficients".into(), join(tau.theta())));
        }
        None => {
            let p = stationary.params(&result.theta)?;
            report.push(("kappa".into(), fmt(p.kappa())));
            report.push(("tau".into(), fmt(p.tau())));
            let undefined = || "undefined".to_string();
            report.push(("sigma2".into(), p.sigma2().map_or_else(undefined, fmt)));
            report.push(("range".into(), p.range().map_or_else(undefined, fmt)));
        }
    }
    report.push(("noise_var".into(), fmt(result.noise_variance)));
    if let Some(b0) = post.intercept() {
        report.push(("intercept".into(), fmt(b0)));
    }
    report.push(("log_likelihood".into(), fmt(result.log_likelihood)));
    report.push((
        "initial_log_likelihood".into(),
        fmt(result.initial_log_likelihood),
    ));
    report.push(("evaluations".into(), result.evaluations.to_string()));
    write_report(&args.out.join("fit.txt"), &report)?;
    for (k, v) in &report {
        println!("{k} = {v}");
    }
    if let Some(grid) = &args.grid {
        write_posterior(&args.out, &space, &post, grid, args.predictive_sd)?;
    }
    println!("wrote {}", args.out.display());
    export_q(args.export_q.as_deref(), &q)
}
