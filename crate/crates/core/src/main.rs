//! The `mggd` command-line tool: sample datasets, fit parameters, dump
//! convergence traces, and drive Monte Carlo experiment sweeps.
//!
//! Exit codes: 0 success, 2 usage or invalid input, 3 bad scatter matrix,
//! 4 fit did not converge (report still written), 5 degenerate data.
//! Every error path prints a single `error: …` line to standard error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use mggd::estimator::{fit_joint, fit_scatter_fp, FitOptions, InitMatrix};
use mggd::experiments::{
    run_beta_variance, run_bias_consistency, run_convergence_trace, ExperimentError,
    ExperimentKind, TraceInit,
};
use mggd::io::{
    self, read_dataset, read_experiment_config, read_scatter_rows, write_dataset,
    write_metrics_csv, write_trace_csv, FitOptionsEcho, ReportFile,
};
use mggd::model::{MggdParams, ModelError, SampleSet};
use mggd::sampler::{sample_mggd, RngSeed};
use mggd::spd::{toeplitz_rho, SpdMatrix};
use mggd::estimator::EstimatorError;

const EXIT_USAGE: i32 = 2;
const EXIT_BAD_MATRIX: i32 = 3;
const EXIT_NOT_CONVERGED: i32 = 4;
const EXIT_DEGENERATE: i32 = 5;

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn usage(message: impl std::fmt::Display) -> Self {
        Self::new(EXIT_USAGE, message.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "mggd",
    version,
    about = "Sampling and maximum-likelihood fitting for multivariate generalized Gaussian distributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it as CSV.
    Sample(SampleArgs),
    /// Fit MGGD parameters to a dataset CSV.
    Fit(FitArgs),
    /// Emit per-iteration convergence criteria for one scenario.
    Trace(TraceArgs),
    /// Run a Monte Carlo experiment described by a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Dimension p of each observation.
    #[arg(long)]
    p: usize,
    /// Shape parameter in (0, 1).
    #[arg(long)]
    beta: f64,
    /// Scale parameter m > 0.
    #[arg(long)]
    m: f64,
    /// Number of observations.
    #[arg(long)]
    n: usize,
    /// Master seed; all randomness flows from it.
    #[arg(long)]
    seed: u64,
    /// Stream id under the master seed.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Toeplitz scatter M(i,j) = rho^|i-j|.
    #[arg(long, conflicts_with = "scatter_file")]
    rho: Option<f64>,
    /// CSV file with a p-by-p scatter matrix (renormalized to trace p).
    #[arg(long, conflicts_with = "rho")]
    scatter_file: Option<PathBuf>,
}

impl ScenarioArgs {
    fn scatter(&self) -> CliResult<SpdMatrix> {
        match (self.rho, &self.scatter_file) {
            (Some(rho), None) => {
                toeplitz_rho(self.p, rho).map_err(|e| CliError::usage(format!("--rho: {e}")))
            }
            (None, Some(path)) => load_scatter_file(path, self.p),
            _ => Err(CliError::usage(
                "exactly one of --rho or --scatter-file is required",
            )),
        }
    }

    fn params(&self) -> CliResult<MggdParams> {
        let scatter = self.scatter()?;
        MggdParams::new(scatter, self.m, self.beta).map_err(CliError::usage)
    }

    fn dataset(&self) -> CliResult<SampleSet> {
        let params = self.params()?;
        let mut rng = RngSeed::new(self.seed, self.stream).rng();
        sample_mggd(&params, self.n, &mut rng).map_err(CliError::usage)
    }
}

fn load_scatter_file(path: &Path, p: usize) -> CliResult<SpdMatrix> {
    let rows = read_scatter_rows(path).map_err(CliError::usage)?;
    if rows.len() != p {
        return Err(CliError::new(
            EXIT_BAD_MATRIX,
            format!("{}: expected {p} rows, got {}", path.display(), rows.len()),
        ));
    }
    let m = SpdMatrix::from_rows(&rows).map_err(|e| {
        CliError::new(EXIT_BAD_MATRIX, format!("{}: {e}", path.display()))
    })?;
    let trace_gap = (m.trace() - p as f64).abs();
    if trace_gap > 1e-6 {
        eprintln!(
            "warning: scatter trace {} differs from {p}; renormalizing (the scatter is identified only up to scale)",
            io::format_float(m.trace())
        );
    }
    Ok(m.normalize_trace())
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset CSV path.
    #[arg(long)]
    data: PathBuf,
    /// Fix the shape (known-beta mode) instead of estimating it.
    #[arg(long)]
    beta: Option<f64>,
    /// Stopping threshold on the relative scatter step.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Initialization: identity, scm, or file:PATH.
    #[arg(long, default_value = "scm")]
    init: String,
    /// Newton start for the shape estimate.
    #[arg(long, default_value_t = 0.5)]
    beta_init: f64,
    /// Report JSON path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma-separated initializations among identity, scm, true.
    #[arg(long, default_value = "identity,scm,true", value_delimiter = ',')]
    inits: Vec<String>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Directory for metrics.csv and trace files.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(args) => cmd_sample(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Trace(args) => cmd_trace(args),
        Command::Experiment(args) => cmd_experiment(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn cmd_sample(args: SampleArgs) -> CliResult<()> {
    let params = args.scenario.params()?;
    let data = args.scenario.dataset()?;
    write_dataset(&args.out, &data).map_err(CliError::usage)?;
    let effective = serde_json::json!({
        "p": args.scenario.p,
        "beta": args.scenario.beta,
        "m": args.scenario.m,
        "n": args.scenario.n,
        "seed": args.scenario.seed,
        "stream": args.scenario.stream,
        "scatter": params.scatter().rows(),
        "out": args.out.display().to_string(),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&effective).expect("json")
    );
    Ok(())
}

fn parse_init(spec: &str, dim_hint: Option<usize>) -> CliResult<InitMatrix> {
    match spec {
        "identity" => Ok(InitMatrix::Identity),
        "scm" => Ok(InitMatrix::ScaledScm),
        other => {
            if let Some(path) = other.strip_prefix("file:") {
                let rows = read_scatter_rows(Path::new(path)).map_err(CliError::usage)?;
                if let Some(p) = dim_hint {
                    if rows.len() != p {
                        return Err(CliError::new(
                            EXIT_BAD_MATRIX,
                            format!("{path}: expected {p} rows, got {}", rows.len()),
                        ));
                    }
                }
                let m = SpdMatrix::from_rows(&rows)
                    .map_err(|e| CliError::new(EXIT_BAD_MATRIX, format!("{path}: {e}")))?;
                Ok(InitMatrix::UserSupplied(m.normalize_trace()))
            } else {
                Err(CliError::usage(format!(
                    "--init must be identity, scm, or file:PATH (got \"{other}\")"
                )))
            }
        }
    }
}

fn map_fit_error(e: EstimatorError) -> CliError {
    match e {
        EstimatorError::DegenerateData { index } => CliError::new(
            EXIT_DEGENERATE,
            format!("degenerate data at row {index}: vanishing quadratic form"),
        ),
        EstimatorError::Model(ModelError::DegenerateData { index }) => CliError::new(
            EXIT_DEGENERATE,
            format!("degenerate data at row {index}"),
        ),
        other => CliError::usage(other),
    }
}

fn cmd_fit(args: FitArgs) -> CliResult<()> {
    let data = read_dataset(&args.data).map_err(|e| match e {
        io::IoError::Model(ModelError::DegenerateData { index }) => CliError::new(
            EXIT_DEGENERATE,
            format!("{}: row {} is the zero vector", args.data.display(), index + 1),
        ),
        other => CliError::usage(other),
    })?;
    let init = parse_init(&args.init, Some(data.dim()))?;
    if args.tol <= 0.0 || args.tol.is_nan() {
        return Err(CliError::usage("--tol must be positive"));
    }
    if args.max_iter == 0 {
        return Err(CliError::usage("--max-iter must be at least 1"));
    }
    let opts = FitOptions {
        tol_c: args.tol,
        max_iter: args.max_iter,
        beta_fixed: args.beta,
        beta_init: args.beta_init,
        init,
        ..FitOptions::default()
    };
    let started = Instant::now();
    let report = match args.beta {
        Some(beta) => fit_scatter_fp(&data, beta, &opts),
        None => fit_joint(&data, &opts),
    }
    .map_err(map_fit_error)?;
    let duration = started.elapsed().as_secs_f64();

    let echo = FitOptionsEcho {
        tol_c: opts.tol_c,
        max_iter: opts.max_iter,
        beta_fixed: opts.beta_fixed,
        beta_init: opts.beta_init,
        init: args.init.clone(),
        newton_max_step: opts.newton_max_step,
        beta_clamp: opts.beta_clamp,
    };
    let file = ReportFile::new(&report, echo, None, duration);
    match &args.out {
        Some(path) => file.write(path).map_err(CliError::usage)?,
        None => println!("{}", file.to_json()),
    }
    if !report.converged {
        return Err(CliError::new(
            EXIT_NOT_CONVERGED,
            format!(
                "fit did not converge within {} iterations (report written)",
                opts.max_iter
            ),
        ));
    }
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> CliResult<()> {
    let inits: Vec<TraceInit> = args
        .inits
        .iter()
        .map(|s| match s.as_str() {
            "identity" => Ok(TraceInit::Identity),
            "scm" => Ok(TraceInit::Scm),
            "true" => Ok(TraceInit::True),
            other => Err(CliError::usage(format!(
                "--inits entries must be identity, scm, or true (got \"{other}\")"
            ))),
        })
        .collect::<CliResult<_>>()?;
    let scatter = args.scenario.scatter()?;
    let rho = args.scenario.rho.unwrap_or(0.0);
    let cfg = mggd::experiments::ExperimentConfig {
        kind: ExperimentKind::Trace,
        p: args.scenario.p,
        rho,
        beta_true: args.scenario.beta,
        m_true: args.scenario.m,
        n_grid: vec![args.scenario.n],
        runs: 1,
        mode: mggd::experiments::FitMode::KnownBeta,
        master_seed: args.scenario.seed,
        beta_grid: None,
        fit: mggd::experiments::FitConfig {
            tol_c: args.tol,
            max_iter: args.max_iter,
            ..Default::default()
        },
    };
    let table = mggd::experiments::run_convergence_trace_with(&cfg, &inits, args.scenario.n, &scatter)
        .map_err(map_experiment_error)?;
    write_trace_csv(&args.out, &table).map_err(CliError::usage)?;
    Ok(())
}

fn map_experiment_error(e: ExperimentError) -> CliError {
    match e {
        ExperimentError::InvalidConfig { .. } => CliError::usage(e),
        ExperimentError::Estimator(inner) => map_fit_error(inner),
        other => CliError::usage(other),
    }
}

fn cmd_experiment(args: ExperimentArgs) -> CliResult<()> {
    let cfg = read_experiment_config(&args.config).map_err(CliError::usage)?;
    cfg.validate().map_err(map_experiment_error)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.out_dir.display())))?;
    let metrics_path = args.out_dir.join("metrics.csv");
    match cfg.kind {
        ExperimentKind::Bias => {
            let records = run_bias_consistency(&cfg).map_err(map_experiment_error)?;
            write_metrics_csv(&metrics_path, &cfg, &records).map_err(CliError::usage)?;
            io::print_flush(&io::summary_table(&records));
        }
        ExperimentKind::Variance => {
            let records = run_beta_variance(&cfg).map_err(map_experiment_error)?;
            write_metrics_csv(&metrics_path, &cfg, &records).map_err(CliError::usage)?;
            io::print_flush(&io::summary_table(&records));
        }
        ExperimentKind::Trace => {
            let inits = [TraceInit::Identity, TraceInit::Scm, TraceInit::True];
            let n = *cfg.n_grid.last().expect("validated nonempty");
            let table =
                run_convergence_trace(&cfg, &inits, n).map_err(map_experiment_error)?;
            let trace_path = args.out_dir.join("trace.csv");
            write_trace_csv(&trace_path, &table).map_err(CliError::usage)?;
            let summary: Vec<String> = table
                .columns
                .iter()
                .map(|(name, v)| format!("{name}: {} iterations", v.len()))
                .collect();
            io::print_flush(&(summary.join("\n") + "\n"));
        }
    }
    Ok(())
}
