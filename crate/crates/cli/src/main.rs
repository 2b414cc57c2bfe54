//! `spline-spde`: assemble, sample, fit and predict spline SPDE fields.

mod commands;
mod converge;
mod error;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use spline_spde::precision::Variant;

use input::{parse_grid, parse_nonstat, Grid, NonStatSpec};

#[derive(Parser)]
#[command(
    name = "spline-spde",
    version,
    about = "Matérn-type GMRF priors on continuous splines over triangulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print mesh counts, size and spline-space dimensions.
    MeshInfo(MeshInfoArgs),
    /// Write the mass, stiffness and roughness matrices as MatrixMarket files.
    Assemble(AssembleArgs),
    /// Draw one seeded sample of the spline weights.
    Sample(SampleArgs),
    /// Fit hyperparameters by maximum likelihood, then predict.
    Fit(FitArgs),
    /// Posterior mean and standard deviation on a grid for fixed hyperparameters.
    Predict(PredictArgs),
    /// Leave-one-out Log Score for fixed hyperparameters.
    Cv(CvArgs),
    /// Refinement study on an analytic surface.
    Converge(converge::ConvergeArgs),
}

#[derive(Args)]
struct SpaceArgs {
    /// Mesh in node/element text format.
    #[arg(long)]
    mesh: PathBuf,
    /// Spline degree.
    #[arg(long, default_value_t = 2)]
    degree: usize,
}

#[derive(Args, Clone)]
struct PriorArgs {
    /// SPDE exponent alpha.
    #[arg(long, default_value_t = 2)]
    alpha: u32,
    /// Precision form: a1, g2, ls2 or rec (default follows alpha).
    #[arg(long)]
    variant: Option<Variant>,
    /// Use the lumped mass matrix in the Galerkin and recursive forms.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    lumped: bool,
    /// Inverse range parameter.
    #[arg(long)]
    kappa: Option<f64>,
    /// Precision scale.
    #[arg(long, conflicts_with = "sigma2")]
    tau: Option<f64>,
    /// Marginal variance; sets tau from kappa (alpha >= 2).
    #[arg(long)]
    sigma2: Option<f64>,
}

#[derive(Args)]
struct DataArgs {
    /// Observations as CSV rows x,y,value.
    #[arg(long)]
    obs: PathBuf,
    /// Observation noise variance.
    #[arg(long)]
    noise_var: Option<f64>,
    /// Add an intercept with a nearly flat prior.
    #[arg(long)]
    intercept: bool,
}

#[derive(Args)]
struct MeshInfoArgs {
    /// Mesh in node/element text format.
    #[arg(long)]
    mesh: PathBuf,
    /// Report only this degree's dimension.
    #[arg(long)]
    degree: Option<usize>,
}

#[derive(Args)]
struct AssembleArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    prior: PriorArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write the precision matrix (needs --kappa and --tau or --sigma2).
    #[arg(long)]
    export_q: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    prior: PriorArgs,
    /// Seed of the sample.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also evaluate the sampled field on xmin:xmax:ymin:ymax:step.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<Grid>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write the prior precision matrix in MatrixMarket format.
    #[arg(long)]
    export_q: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Starting values come from --kappa and --tau/--sigma2 when given.
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Non-stationary log kappa^2 and log tau fields with KX x KY and TX x TY B-spline coefficients.
    #[arg(long, value_parser = parse_nonstat)]
    nonstat: Option<NonStatSpec>,
    /// Seed of the optimizer restarts.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also predict on xmin:xmax:ymin:ymax:step.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<Grid>,
    /// Report predictive instead of latent standard deviations.
    #[arg(long)]
    predictive_sd: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write the prior precision matrix in MatrixMarket format.
    #[arg(long)]
    export_q: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Prediction grid xmin:xmax:ymin:ymax:step.
    #[arg(long, value_parser = parse_grid)]
    grid: Grid,
    /// Report predictive instead of latent standard deviations.
    #[arg(long)]
    predictive_sd: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write the prior precision matrix in MatrixMarket format.
    #[arg(long)]
    export_q: Option<PathBuf>,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Also write the score to this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MeshInfo(a) => commands::mesh_info(&a),
        Command::Assemble(a) => commands::assemble(&a),
        Command::Sample(a) => commands::sample(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Cv(a) => commands::cv(&a),
        Command::Converge(a) => converge::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
