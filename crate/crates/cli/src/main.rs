//! `ifem`: solves, convergence studies, verification and mesh diagnostics
//! for the circular-interface benchmark.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{OutputFormat, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ifem_core::Error),
    #[error("{0} verification check(s) failed")]
    Verify(usize),
    #[error("{0} convergence row(s) failed")]
    RowsFailed(usize),
}

impl CliError {
    fn from_invalid(e: ifem_core::Error) -> CliError {
        match e {
            ifem_core::Error::Invalid(msg) => CliError::Config(msg),
            other => CliError::Core(other),
        }
    }

    fn exit_code(&self) -> u8 {
        use ifem_core::Error;
        match self {
            CliError::Config(_) | CliError::Core(Error::Invalid(_) | Error::Mesh(_)) => 2,
            CliError::Verify(_) => 1,
            CliError::Core(Error::Geometry(_)) => 3,
            CliError::Core(Error::Solver(_)) | CliError::RowsFailed(_) => 4,
        }
    }
}

impl From<ifem_core::GeometryError> for CliError {
    fn from(e: ifem_core::GeometryError) -> Self {
        CliError::Core(e.into())
    }
}

impl From<ifem_core::SolverError> for CliError {
    fn from(e: ifem_core::SolverError) -> Self {
        CliError::Core(e.into())
    }
}

impl From<ifem_core::MeshError> for CliError {
    fn from(e: ifem_core::MeshError) -> Self {
        CliError::Core(e.into())
    }
}

#[derive(Parser, Debug)]
#[command(name = "ifem", version, about = "Finite element solvers for an elliptic interface problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single solve of the radial benchmark with error norms and solver statistics.
    Solve(RunArgs),
    /// Error tables over a list of refinements.
    Convergence(RunArgs),
    /// Geometry, assembly and solver consistency checks.
    Verify(RunArgs),
    /// Classification counts and quality diagnostics of the cut mesh.
    MeshInfo(RunArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// standard, fitted or hybrid
    #[arg(long)]
    method: Option<String>,
    /// Subdivisions per side of the square.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated refinements, each twice the previous.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Coefficient inside the circle.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Coefficient outside the circle.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Circle radius.
    #[arg(long)]
    r1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    cx: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    cy: Option<f64>,
    /// Relative residual for primal conjugate gradients.
    #[arg(long)]
    cg_tol: Option<f64>,
    /// Relative residual for the multiplier iteration.
    #[arg(long)]
    outer_tol: Option<f64>,
    /// Diagonal preconditioning of the primal solves.
    #[arg(long)]
    jacobi: bool,
    /// Solution dump (solve) or CSV file (convergence; markdown goes next to it).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table format on standard output.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Gradient error: parent, sub or interp.
    #[arg(long)]
    norm_variant: Option<String>,
    /// Solve a linear-solution patch problem instead of the benchmark.
    #[arg(long)]
    patch_test: bool,
    /// JSON file with flat keys; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the effective configuration as JSON before running.
    #[arg(long)]
    dump_config: Option<PathBuf>,
}

impl RunArgs {
    fn flags(&self) -> RunConfig {
        RunConfig {
            method: self.method.clone(),
            n: self.n,
            n_list: self.n_list.clone(),
            alpha: self.alpha,
            beta: self.beta,
            r1: self.r1,
            cx: self.cx,
            cy: self.cy,
            cg_tol: self.cg_tol,
            outer_tol: self.outer_tol,
            jacobi: self.jacobi.then_some(true),
            out: self.out.clone(),
            format: self.format,
            norm_variant: self.norm_variant.clone(),
            patch_test: self.patch_test.then_some(true),
        }
    }

    fn resolve(&self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let cfg = base.merged(&self.flags());
        cfg.validate()?;
        if let Some(path) = &self.dump_config {
            cfg.save(path)?;
        }
        Ok(cfg)
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("IFEM_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(format!("IFEM_THREADS: expected a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("IFEM_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Solve(a) => commands::solve(&a.resolve()?),
        Command::Convergence(a) => commands::convergence(&a.resolve()?),
        Command::Verify(a) => commands::verify(&a.resolve()?),
        Command::MeshInfo(a) => commands::mesh_info(&a.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
