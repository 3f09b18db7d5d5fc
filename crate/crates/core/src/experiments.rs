//! Monte Carlo harness: convergence traces, bias, consistency, and
//! shape-variance sweeps with deterministic seed management.
//!
//! Every run draws its dataset from the stream (master_seed, stream = run
//! index), so a sweep's outputs are identical whether runs execute serially
//! or on a worker pool, and any single cell can be reproduced in isolation.
//! Runs fan out through rayon; aggregation is a deterministic fold in
//! run-index order. Fit failures are recorded per cell, never fatal: a cell
//! where every run failed reports NaN metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{
    convergence_criteria, fit_joint, fit_scatter_fp, normalized_recursion_iterates,
    unnormalized_recursion_iterates, EstimatorError, FitOptions, InitMatrix,
};
use crate::model::{MggdParams, ModelError};
use crate::sampler::{sample_mggd, RngSeed};
use crate::spd::{toeplitz_rho, SpdError, SpdMatrix};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {field}: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("fit did not converge within the iteration budget")]
    RunDidNotConverge,

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Estimator(#[from] EstimatorError),

    #[error(transparent)]
    Linalg(#[from] SpdError),
}

fn bad_field(field: &str, message: impl Into<String>) -> ExperimentError {
    ExperimentError::InvalidConfig {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Which sweep a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Bias and consistency of the scatter estimate across the N grid.
    Bias,
    /// Empirical variance and MSE of the shape estimate.
    Variance,
    /// Per-iteration C(k)/D(k) convergence curves.
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Fit the scatter at the true shape.
    KnownBeta,
    /// Estimate scatter and shape jointly.
    JointFit,
}

/// Fit knobs exposed through the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub tol_c: f64,
    pub max_iter: usize,
    pub beta_init: f64,
    /// "identity" or "scm".
    pub init: String,
}

impl Default for FitConfig {
    fn default() -> Self {
        let defaults = FitOptions::default();
        Self {
            tol_c: defaults.tol_c,
            max_iter: defaults.max_iter,
            beta_init: defaults.beta_init,
            init: "scm".to_string(),
        }
    }
}

impl FitConfig {
    pub fn to_options(&self) -> Result<FitOptions, ExperimentError> {
        let init = match self.init.as_str() {
            "identity" => InitMatrix::Identity,
            "scm" => InitMatrix::ScaledScm,
            other => {
                return Err(bad_field(
                    "fit.init",
                    format!("expected \"identity\" or \"scm\", got \"{other}\""),
                ))
            }
        };
        if self.tol_c <= 0.0 || self.tol_c.is_nan() {
            return Err(bad_field("fit.tol_c", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(bad_field("fit.max_iter", "must be at least 1"));
        }
        Ok(FitOptions {
            tol_c: self.tol_c,
            max_iter: self.max_iter,
            beta_init: self.beta_init,
            init,
            ..FitOptions::default()
        })
    }
}

/// Declarative Monte Carlo sweep.
///
/// `beta_grid` switches the variance sweep from the N protocol (sweep
/// `n_grid` at `beta_true`) to the shape protocol (sweep `beta_grid` at a
/// single sample size, which must then be the only entry of `n_grid`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub p: usize,
    pub rho: f64,
    pub beta_true: f64,
    pub m_true: f64,
    pub n_grid: Vec<usize>,
    /// Monte Carlo repetitions per cell.
    pub runs: usize,
    pub mode: FitMode,
    pub master_seed: u64,
    #[serde(default)]
    pub beta_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub fit: FitConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.p == 0 {
            return Err(bad_field("p", "must be at least 1"));
        }
        if !(self.rho.is_finite() && (0.0..1.0).contains(&self.rho)) {
            return Err(bad_field("rho", "must lie in [0, 1)"));
        }
        if !(self.beta_true > 0.0 && self.beta_true < 1.0) {
            return Err(bad_field("beta_true", "must lie in (0, 1)"));
        }
        if !(self.m_true.is_finite() && self.m_true > 0.0) {
            return Err(bad_field("m_true", "must be positive"));
        }
        if self.n_grid.is_empty() {
            return Err(bad_field("n_grid", "must be nonempty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad_field("n_grid", "must be strictly ascending"));
        }
        if self.runs == 0 {
            return Err(bad_field("runs", "must be at least 1"));
        }
        if let Some(grid) = &self.beta_grid {
            if grid.is_empty() {
                return Err(bad_field("beta_grid", "must be nonempty when present"));
            }
            if grid.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
                return Err(bad_field("beta_grid", "entries must lie in (0, 1)"));
            }
            if self.n_grid.len() != 1 {
                return Err(bad_field(
                    "n_grid",
                    "must hold exactly one sample size when beta_grid is set",
                ));
            }
        }
        if self.kind == ExperimentKind::Variance && self.mode != FitMode::JointFit {
            return Err(bad_field("mode", "variance sweeps require joint_fit"));
        }
        self.fit.to_options().map(|_| ())
    }

    fn scatter(&self) -> Result<SpdMatrix, ExperimentError> {
        Ok(toeplitz_rho(self.p, self.rho)?.normalize_trace())
    }
}

/// Aggregated outputs of one sweep cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Sample size of the cell.
    pub n: usize,
    /// Shape used to generate the cell's data.
    pub beta_true: f64,
    /// ‖Ā − A‖_F of the mean estimated scatter against the truth.
    pub bias_norm: f64,
    /// Mean over runs of ‖Â − A‖_F.
    pub consistency: f64,
    /// Mean of the shape estimates (NaN in known-shape mode).
    pub beta_mean: f64,
    /// Empirical variance (n−1 denominator) of the shape estimates.
    pub beta_var: f64,
    /// Mean squared error of the shape estimates.
    pub beta_mse: f64,
    pub mean_iterations: f64,
    /// Runs that errored or failed to converge; excluded from aggregates.
    pub failure_count: usize,
}

struct RunOutcome {
    scatter: SpdMatrix,
    beta: f64,
    iterations: usize,
}

fn run_one(
    cfg: &ExperimentConfig,
    truth: &SpdMatrix,
    beta_true: f64,
    n: usize,
    run_idx: u64,
) -> Result<RunOutcome, ExperimentError> {
    let params = MggdParams::new(truth.clone(), cfg.m_true, beta_true)?;
    let mut rng = RngSeed::new(cfg.master_seed, run_idx).rng();
    let data = sample_mggd(&params, n, &mut rng)?;
    let opts = cfg.fit.to_options()?;
    let report = match cfg.mode {
        FitMode::KnownBeta => fit_scatter_fp(&data, beta_true, &opts)?,
        FitMode::JointFit => fit_joint(&data, &opts)?,
    };
    if !report.converged {
        return Err(ExperimentError::RunDidNotConverge);
    }
    Ok(RunOutcome {
        scatter: report.scatter,
        beta: report.beta,
        iterations: report.iterations,
    })
}

fn aggregate_cell(
    cfg: &ExperimentConfig,
    truth: &SpdMatrix,
    beta_true: f64,
    n: usize,
) -> MetricsRecord {
    let outcomes: Vec<Option<RunOutcome>> = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|run_idx| run_one(cfg, truth, beta_true, n, run_idx).ok())
        .collect();

    let p = cfg.p;
    let successes: Vec<&RunOutcome> = outcomes.iter().flatten().collect();
    let failure_count = cfg.runs - successes.len();
    if successes.is_empty() {
        return MetricsRecord {
            n,
            beta_true,
            bias_norm: f64::NAN,
            consistency: f64::NAN,
            beta_mean: f64::NAN,
            beta_var: f64::NAN,
            beta_mse: f64::NAN,
            mean_iterations: f64::NAN,
            failure_count,
        };
    }

    let count = successes.len() as f64;
    let mut mean_scatter = vec![0.0; p * p];
    let mut consistency = 0.0;
    let mut beta_mean = 0.0;
    let mut beta_mse = 0.0;
    let mut iters = 0.0;
    for o in &successes {
        for (acc, v) in mean_scatter.iter_mut().zip(o.scatter.entries()) {
            *acc += v;
        }
        consistency += o
            .scatter
            .entries()
            .iter()
            .zip(truth.entries())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        beta_mean += o.beta;
        beta_mse += (o.beta - beta_true) * (o.beta - beta_true);
        iters += o.iterations as f64;
    }
    for v in &mut mean_scatter {
        *v /= count;
    }
    beta_mean /= count;
    let beta_var = if successes.len() > 1 {
        successes
            .iter()
            .map(|o| (o.beta - beta_mean) * (o.beta - beta_mean))
            .sum::<f64>()
            / (count - 1.0)
    } else {
        f64::NAN
    };
    let bias_norm = mean_scatter
        .iter()
        .zip(truth.entries())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();

    MetricsRecord {
        n,
        beta_true,
        bias_norm,
        consistency: consistency / count,
        beta_mean: if cfg.mode == FitMode::JointFit {
            beta_mean
        } else {
            f64::NAN
        },
        beta_var,
        beta_mse: beta_mse / count,
        mean_iterations: iters / count,
        failure_count,
    }
}

/// Bias (‖Ā − A‖_F of the run-mean scatter) and consistency
/// (mean ‖Â − A‖_F) for each sample size in the grid.
pub fn run_bias_consistency(
    cfg: &ExperimentConfig,
) -> Result<Vec<MetricsRecord>, ExperimentError> {
    cfg.validate()?;
    let truth = cfg.scatter()?;
    Ok(cfg
        .n_grid
        .iter()
        .map(|&n| aggregate_cell(cfg, &truth, cfg.beta_true, n))
        .collect())
}

/// Empirical variance and MSE of the shape estimate, sweeping either the
/// sample-size grid at `beta_true` or `beta_grid` at a fixed sample size.
pub fn run_beta_variance(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>, ExperimentError> {
    cfg.validate()?;
    if cfg.mode != FitMode::JointFit {
        return Err(bad_field("mode", "variance sweeps require joint_fit"));
    }
    let truth = cfg.scatter()?;
    match &cfg.beta_grid {
        Some(grid) => {
            let n = cfg.n_grid[0];
            Ok(grid
                .iter()
                .map(|&beta| aggregate_cell(cfg, &truth, beta, n))
                .collect())
        }
        None => Ok(cfg
            .n_grid
            .iter()
            .map(|&n| aggregate_cell(cfg, &truth, cfg.beta_true, n))
            .collect()),
    }
}

/// Initializations exercised by the convergence-trace experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceInit {
    Identity,
    Scm,
    True,
}

impl TraceInit {
    pub fn column_name(&self) -> &'static str {
        match self {
            TraceInit::Identity => "C_identity",
            TraceInit::Scm => "C_scm",
            TraceInit::True => "C_true",
        }
    }
}

/// Column-oriented table of per-iteration criteria; columns may have
/// different lengths (each recursion stops on its own).
#[derive(Debug, Clone)]
pub struct TraceTable {
    pub columns: Vec<(String, Vec<f64>)>,
}

impl TraceTable {
    pub fn max_len(&self) -> usize {
        self.columns.iter().map(|(_, v)| v.len()).max().unwrap_or(0)
    }
}

/// One dataset, several initializations: per-iteration C(k) for each init,
/// plus the D(k) comparison of the trace-normalized recursion (on
/// Â_k = m̂_k·M̂_k) against the unnormalized Σ recursion on the same data.
pub fn run_convergence_trace(
    cfg: &ExperimentConfig,
    inits: &[TraceInit],
    n: usize,
) -> Result<TraceTable, ExperimentError> {
    let truth = cfg.scatter()?;
    run_convergence_trace_with(cfg, inits, n, &truth)
}

/// Convergence trace against a caller-supplied generating scatter (the
/// `--scatter-file` path of the CLI).
pub fn run_convergence_trace_with(
    cfg: &ExperimentConfig,
    inits: &[TraceInit],
    n: usize,
    truth: &SpdMatrix,
) -> Result<TraceTable, ExperimentError> {
    cfg.validate()?;
    if inits.is_empty() {
        return Err(bad_field("inits", "must request at least one initialization"));
    }
    let params = MggdParams::new(truth.clone(), cfg.m_true, cfg.beta_true)?;
    let mut rng = RngSeed::new(cfg.master_seed, 0).rng();
    let data = sample_mggd(&params, n, &mut rng)?;
    let base_opts = cfg.fit.to_options()?;

    let mut columns = Vec::new();
    for init in inits {
        let opts = FitOptions {
            init: match init {
                TraceInit::Identity => InitMatrix::Identity,
                TraceInit::Scm => InitMatrix::ScaledScm,
                TraceInit::True => InitMatrix::UserSupplied(truth.clone()),
            },
            ..base_opts.clone()
        };
        let report = fit_scatter_fp(&data, cfg.beta_true, &opts)?;
        columns.push((init.column_name().to_string(), report.c_trace));
    }

    let (_, scale_iterates) = normalized_recursion_iterates(&data, cfg.beta_true, &base_opts)?;
    columns.push((
        "D_normalized".to_string(),
        convergence_criteria(&scale_iterates)?,
    ));
    // The unnormalized comparator needs more headroom: its scale component
    // relaxes at rate 1-β per step.
    let raw = unnormalized_recursion_iterates(&data, cfg.beta_true, base_opts.tol_c, 2000)?;
    columns.push(("D_unnormalized".to_string(), convergence_criteria(&raw)?));

    Ok(TraceTable { columns })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_config() -> ExperimentConfig {
        ExperimentConfig {
            kind: ExperimentKind::Bias,
            p: 3,
            rho: 0.8,
            beta_true: 0.2,
            m_true: 1.0,
            n_grid: vec![100, 500],
            runs: 8,
            mode: FitMode::KnownBeta,
            master_seed: 42,
            beta_grid: None,
            fit: FitConfig::default(),
        }
    }

    #[test]
    fn determinism_and_worker_count_independence() {
        let cfg = desk_config();
        let a = run_bias_consistency(&cfg).unwrap();
        let b = run_bias_consistency(&cfg).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_bias_consistency(&cfg).unwrap());
        for ((x, y), z) in a.iter().zip(&b).zip(&single) {
            assert_eq!(x.bias_norm.to_bits(), y.bias_norm.to_bits());
            assert_eq!(x.consistency.to_bits(), y.consistency.to_bits());
            assert_eq!(x.bias_norm.to_bits(), z.bias_norm.to_bits());
            assert_eq!(x.consistency.to_bits(), z.consistency.to_bits());
            assert_eq!(x.failure_count, z.failure_count);
        }
    }

    #[test]
    fn consistency_shrinks_with_n() {
        let records = run_bias_consistency(&desk_config()).unwrap();
        assert_eq!(records.len(), 2);
        assert!(records[0].consistency > records[1].consistency);
        assert_eq!(records[0].failure_count, 0);
    }

    #[test]
    fn failures_are_counted_not_fatal() {
        let mut cfg = desk_config();
        cfg.fit.max_iter = 1;
        let records = run_bias_consistency(&cfg).unwrap();
        assert_eq!(records[0].failure_count, cfg.runs);
        assert!(records[0].bias_norm.is_nan());
        assert!(records[0].consistency.is_nan());
    }

    #[test]
    fn validation_messages_name_fields() {
        let mut cfg = desk_config();
        cfg.n_grid = vec![];
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("n_grid"), "{err}");

        let mut cfg = desk_config();
        cfg.rho = 1.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("rho"));

        let mut cfg = desk_config();
        cfg.kind = ExperimentKind::Variance;
        assert!(cfg.validate().unwrap_err().to_string().contains("mode"));

        let mut cfg = desk_config();
        cfg.beta_grid = Some(vec![0.2, 0.5]);
        assert!(cfg.validate().unwrap_err().to_string().contains("n_grid"));
    }

    #[test]
    fn beta_variance_sweeps_shape_grid() {
        let mut cfg = desk_config();
        cfg.kind = ExperimentKind::Variance;
        cfg.mode = FitMode::JointFit;
        cfg.n_grid = vec![400];
        cfg.beta_grid = Some(vec![0.3, 0.6]);
        cfg.runs = 6;
        let records = run_beta_variance(&cfg).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].beta_true, 0.3);
        assert_eq!(records[1].beta_true, 0.6);
        for r in &records {
            assert_eq!(r.n, 400);
            assert_eq!(r.failure_count, 0);
            assert!(r.beta_var.is_finite());
        }
    }

    #[test]
    fn trace_table_has_requested_columns() {
        let cfg = desk_config();
        let table = run_convergence_trace(
            &cfg,
            &[TraceInit::Identity, TraceInit::Scm, TraceInit::True],
            200,
        )
        .unwrap();
        let names: Vec<&str> = table.columns.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            vec!["C_identity", "C_scm", "C_true", "D_normalized", "D_unnormalized"]
        );
        for (name, values) in &table.columns {
            assert!(
                values.last().unwrap() < &1e-6,
                "{name} did not converge: {:?}",
                values.last()
            );
        }
    }

    #[test]
    fn larger_n_converges_no_slower() {
        let mut iters_small = Vec::new();
        let mut iters_large = Vec::new();
        for seed in 0..20 {
            let mut cfg = desk_config();
            cfg.master_seed = 9000 + seed;
            let t100 = run_convergence_trace(&cfg, &[TraceInit::Scm], 100).unwrap();
            let t2000 = run_convergence_trace(&cfg, &[TraceInit::Scm], 2000).unwrap();
            iters_small.push(t100.columns[0].1.len());
            iters_large.push(t2000.columns[0].1.len());
        }
        iters_small.sort_unstable();
        iters_large.sort_unstable();
        let med_small = iters_small[iters_small.len() / 2];
        let med_large = iters_large[iters_large.len() / 2];
        assert!(
            med_large <= med_small,
            "median iterations at N=2000 ({med_large}) > at N=100 ({med_small})"
        );
    }
}
