//! Command-line front end: `complete`, `generate` and `benchmark`.
//!
//! Exit codes: 0 success, 2 usage error, 3 data or parse error, 4 numerical
//! failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::BenchmarkConfig;
use crate::error::Error;
use crate::io::{ingest_matrix_csv, read_mask_csv, write_mask_csv, write_matrix_csv, EmptyCellPolicy};
use crate::matrix::ObservationMask;
use crate::problem::{CompletionProblem, Formulation, SolveStatus, SolverConfig};
use crate::report::run_benchmark;
use crate::solvers::solve;
use crate::synth::{
    add_noise, derive_seed, generate_low_rank, sample_structured_mask, GeneratorSpec, Purpose, SamplingSpec,
};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] Error),
    /// The solver ran but reported a numerical failure; outputs were still
    /// written for inspection.
    #[error("solver reported a numerical failure")]
    SolverFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::SolverFailed => EXIT_NUMERICAL,
            CliError::Run(e) => error_code(e),
        }
    }
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => EXIT_NUMERICAL,
        Error::Cell { source, .. } => error_code(source),
        _ => EXIT_DATA,
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "structured-mc", version, about = "Low-rank matrix completion with regularized unobserved entries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complete a partially observed matrix
    Complete(CompleteArgs),
    /// Draw a synthetic low-rank matrix and a structured observation mask
    Generate(GenerateArgs),
    /// Run an error-ratio sweep described by a TOML config
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Maximum ADMM iterations
    #[arg(long, default_value_t = SolverConfig::default().max_iters)]
    pub max_iters: usize,
    /// Stopping tolerance for both RMS residuals
    #[arg(long, default_value_t = SolverConfig::default().primal_tol)]
    pub tol: f64,
    /// Initial ADMM penalty
    #[arg(long, default_value_t = SolverConfig::default().admm_penalty)]
    pub penalty: f64,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, CliError> {
        let cfg = SolverConfig {
            max_iters: self.max_iters,
            admm_penalty: self.penalty,
            ..SolverConfig::default()
        }
        .with_tolerance(self.tol);
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("mask_source").required(true).args(["mask", "infer_mask"])))]
pub struct CompleteArgs {
    /// Input matrix CSV (no header; empty cells allowed with --infer-mask)
    #[arg(long)]
    pub input: PathBuf,
    /// Observed entries as a `row,col` CSV of zero-based index pairs
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Treat the empty cells of the input as the unobserved entries
    #[arg(long)]
    pub infer_mask: bool,
    /// nnm-exact, nnm-reg, nnm-noisy, nnm-noisy-reg or rpca-restricted
    #[arg(long)]
    pub formulation: Formulation,
    /// L1 weight on the unobserved entries (nnm-reg, nnm-noisy-reg, rpca-restricted)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the nuclear norm against the data fit (noisy formulations)
    #[arg(long, conflicts_with = "sigma")]
    pub rho: Option<f64>,
    /// Noise level; sets rho from the matrix shape and |Ω| (noisy formulations)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Completed matrix CSV to write
    #[arg(long)]
    pub output: PathBuf,
    /// Diagnostics JSON to write [default: <output>.json]
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    /// Sparse component CSV to write (rpca-restricted only)
    #[arg(long)]
    pub sparse_output: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of rows
    #[arg(long)]
    pub n1: usize,
    /// Number of columns
    #[arg(long)]
    pub n2: usize,
    /// Inner dimension of the factors
    #[arg(long)]
    pub rank: usize,
    /// Entry density of the left factor, in [0, 1]
    #[arg(long)]
    pub density_left: f64,
    /// Entry density of the right factor, in [0, 1]
    #[arg(long)]
    pub density_right: f64,
    /// Seed for the matrix; mask and noise seeds derive from it unless given
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of zero entries observed
    #[arg(long, default_value_t = 1.0)]
    pub rate_zero: f64,
    /// Fraction of nonzero entries observed
    #[arg(long, default_value_t = 1.0)]
    pub rate_nonzero: f64,
    /// Seed for the mask draw
    #[arg(long)]
    pub mask_seed: Option<u64>,
    /// Gaussian noise level added to the observed entries of observed.csv
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Seed for the noise draw
    #[arg(long)]
    pub noise_seed: Option<u64>,
    /// Directory for truth.csv, mask.csv, observed.csv and manifest.json
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// TOML run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for the results, heatmap and manifest files
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads [default: all cores]; results do not depend on it
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct CompleteDiagnostics {
    pub input: PathBuf,
    pub mask: Option<PathBuf>,
    pub rows: usize,
    pub cols: usize,
    pub observed: usize,
    pub formulation: Formulation,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub sigma: Option<f64>,
    pub solver: SolverConfig,
    pub status: SolveStatus,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rank_estimate: usize,
    pub output: PathBuf,
    pub sparse_output: Option<PathBuf>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
    std::fs::write(path, text + "\n").map_err(Error::from)?;
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be positive, got {v}")))
    }
}

pub fn cmd_complete(args: &CompleteArgs) -> Result<CompleteDiagnostics, CliError> {
    let f = args.formulation;
    let alpha = match (f.uses_alpha(), args.alpha) {
        (true, Some(a)) => Some(check_positive("alpha", a)?),
        (true, None) => return Err(usage(format!("{f} requires --alpha"))),
        (false, Some(_)) => return Err(usage(format!("--alpha does not apply to {f}"))),
        (false, None) => None,
    };
    if !f.uses_rho() && (args.rho.is_some() || args.sigma.is_some()) {
        return Err(usage(format!("--rho and --sigma do not apply to {f}")));
    }
    if f.uses_rho() && args.rho.is_none() && args.sigma.is_none() {
        return Err(usage(format!("{f} requires --rho or --sigma")));
    }
    if args.sparse_output.is_some() && f != Formulation::RpcaRestricted {
        return Err(usage("--sparse-output applies to rpca-restricted only"));
    }
    if let Some(s) = args.sigma {
        check_positive("sigma", s)?;
    }
    if let Some(r) = args.rho {
        check_positive("rho", r)?;
    }
    let cfg = args.solver.config()?;

    let (values, mask) = match &args.mask {
        Some(mask_path) => {
            let (values, present) = ingest_matrix_csv(&args.input, EmptyCellPolicy::Mask)?;
            let mask = read_mask_csv(mask_path, values.rows(), values.cols())?;
            if let Some(&(i, j)) = mask.observed().iter().find(|&&(i, j)| !present.contains(i, j)) {
                return Err(Error::Parse {
                    row: i,
                    col: j,
                    msg: "entry is listed in the mask but empty in the matrix".into(),
                }
                .into());
            }
            (values, mask)
        }
        None => ingest_matrix_csv(&args.input, EmptyCellPolicy::Mask)?,
    };
    if mask.is_empty() {
        return Err(Error::InvalidArgument("no observed entries".into()).into());
    }

    let (n1, n2) = values.shape();
    let rho = match (args.rho, args.sigma) {
        (Some(r), _) => Some(r),
        (None, Some(s)) => Some(crate::synth::rho_for_noise(n1, n2, mask.len(), s)?),
        (None, None) => None,
    };
    let observed = mask.len();
    let problem = CompletionProblem::new(&values, mask, f, alpha.unwrap_or(0.0), rho.unwrap_or(0.0))?;
    let solution = solve(&problem, &cfg)?;
    let r = &solution.result;
    log::info!(
        "{f}: {} after {} iterations, objective {}",
        r.status,
        r.iterations,
        r.objective
    );
    if r.status == SolveStatus::MaxIters {
        log::warn!("iteration limit reached before the residual tolerances");
    }

    write_matrix_csv(&args.output, &r.completed, None)?;
    if let (Some(path), Some(sparse)) = (&args.sparse_output, &solution.sparse) {
        write_matrix_csv(path, sparse, None)?;
    }
    let diagnostics = CompleteDiagnostics {
        input: args.input.clone(),
        mask: args.mask.clone(),
        rows: n1,
        cols: n2,
        observed,
        formulation: f,
        alpha,
        rho,
        sigma: args.sigma,
        solver: cfg,
        status: r.status,
        objective: r.objective,
        iterations: r.iterations,
        primal_residual: r.primal_residual,
        dual_residual: r.dual_residual,
        rank_estimate: r.rank_estimate,
        output: args.output.clone(),
        sparse_output: args.sparse_output.clone(),
    };
    let diag_path = args.diagnostics.clone().unwrap_or_else(|| {
        let mut p = args.output.clone().into_os_string();
        p.push(".json");
        PathBuf::from(p)
    });
    write_json(&diag_path, &diagnostics)?;
    if r.status == SolveStatus::NumericalFailure {
        return Err(CliError::SolverFailed);
    }
    Ok(diagnostics)
}

#[derive(Debug, Serialize)]
pub struct GenerateManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub n1: usize,
    pub n2: usize,
    pub rank: usize,
    pub density_left: f64,
    pub density_right: f64,
    pub seed: u64,
    pub rate_zero: f64,
    pub rate_nonzero: f64,
    pub mask_seed: u64,
    pub noise_sigma: f64,
    pub noise_seed: Option<u64>,
    pub observed: usize,
    pub nonzero_entries: usize,
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<GenerateManifest, CliError> {
    let spec = GeneratorSpec::new(
        args.n1,
        args.n2,
        args.rank,
        args.density_left,
        args.density_right,
        args.seed,
    );
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let mask_seed = args
        .mask_seed
        .unwrap_or_else(|| derive_seed(args.seed, &[Purpose::Mask as u64]));
    let sampling = SamplingSpec {
        rate_zero: args.rate_zero,
        rate_nonzero: args.rate_nonzero,
        seed: mask_seed,
    };
    sampling.validate().map_err(|e| usage(e.to_string()))?;
    if !(args.noise_sigma >= 0.0 && args.noise_sigma.is_finite()) {
        return Err(usage("--noise-sigma must be nonnegative"));
    }

    let truth = generate_low_rank(&spec)?;
    if truth.is_zero() {
        return Err(Error::DegenerateDraw {
            attempts: 1,
            reason: "generated matrix is all zeros".into(),
        }
        .into());
    }
    let mask: ObservationMask = sample_structured_mask(&truth, &sampling)?;
    let noise_seed = (args.noise_sigma > 0.0).then(|| {
        args.noise_seed
            .unwrap_or_else(|| derive_seed(args.seed, &[Purpose::Noise as u64]))
    });
    let observed = add_noise(&truth, args.noise_sigma, &mask, noise_seed.unwrap_or(0))?;

    std::fs::create_dir_all(&args.out_dir).map_err(Error::from)?;
    write_matrix_csv(&args.out_dir.join("truth.csv"), &truth, None)?;
    write_mask_csv(&args.out_dir.join("mask.csv"), &mask)?;
    write_matrix_csv(&args.out_dir.join("observed.csv"), &observed, Some(&mask))?;
    let manifest = GenerateManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        n1: args.n1,
        n2: args.n2,
        rank: args.rank,
        density_left: args.density_left,
        density_right: args.density_right,
        seed: args.seed,
        rate_zero: args.rate_zero,
        rate_nonzero: args.rate_nonzero,
        mask_seed,
        noise_sigma: args.noise_sigma,
        noise_seed,
        observed: mask.len(),
        nonzero_entries: truth.as_nalgebra().iter().filter(|&&x| x != 0.0).count(),
    };
    write_json(&args.out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let config = BenchmarkConfig::load(&args.config)?;
    let run = || run_benchmark(&config, &args.out_dir);
    let out = match args.threads {
        Some(0) => return Err(usage("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| usage(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    log::info!("wrote {}", out.results_path.display());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Complete(a) => cmd_complete(a).map(|_| ()),
        Command::Generate(a) => cmd_generate(a).map(|_| ()),
        Command::Benchmark(a) => cmd_benchmark(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
