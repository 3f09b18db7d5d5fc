//! Maximum-likelihood estimation of MGGD parameters.
//!
//! The scatter MLE satisfies the fixed-point equation M = f_χ(M) with
//!
//! ```text
//! f_χ(M) = (1/N) Σ_i [N p / (y_i + y_i^{1-β} Σ_{j≠i} y_j^β)] x_i x_iᵀ,
//! y_i    = x_iᵀ M⁻¹ x_i,
//! ```
//!
//! which the implementation evaluates in the algebraically identical form
//! f_χ(M) = p (Σ_j y_j^β)⁻¹ Σ_i x_i x_iᵀ / y_i^{1-β}, computing the sum
//! Σ y^β once per iteration: the per-sample denominator reduces as
//! y_i + y_i^{1-β}(S - y_i^β) = y_i^{1-β} S. The recursion
//! M_{k+1} = normalize_trace(f_χ(M_k)) converges to the unique (up to scale)
//! fixed point for any positive-definite start, which is also the maximizer
//! of the profile likelihood F_χ.
//!
//! The scale MLE is the closed form m̂ = [β/(pN) Σ y_i^β]^{1/β}, and the
//! shape MLE solves the likelihood equation α(β) = 0 by a safeguarded
//! Newton-Raphson iteration (analytic derivative, step clipping, clamping to
//! the working range, bisection fallback on a flat derivative). The joint
//! fit alternates exactly one scatter update and one shape update per outer
//! iteration, then computes m̂ at the end.

use thiserror::Error;

use crate::model::{
    log_sum_y_beta, sample_covariance, ModelError, SampleSet, BETA_MAX, BETA_MIN,
};
use crate::spd::{rel_frobenius_dist, SpdError, SpdMatrix};
use crate::special::{digamma, trigamma};

/// Quadratic forms below this are treated as degenerate rather than
/// silently regularized; regularization would break the fixed-point
/// equation's invariants.
const Y_UNDERFLOW_GUARD: f64 = 1e-300;

/// |α′(β)| below this signals a flat likelihood in β.
const ZERO_DERIVATIVE_GUARD: f64 = 1e-12;

/// Points scanned when looking for a sign-changing bracket of α.
const BISECTION_SCAN_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("sample {index} yields a vanishing quadratic form; data is degenerate")]
    DegenerateData { index: usize },

    #[error("|α′(β)| < {ZERO_DERIVATIVE_GUARD:e} at β = {beta}: flat likelihood in the shape")]
    ZeroDerivative { beta: f64 },

    #[error("iterate trace needs at least two matrices")]
    EmptyTrace,

    #[error("shape must lie in (0, 1], got {0}")]
    InvalidShape(f64),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Linalg(#[from] SpdError),
}

/// Initial scatter for the fixed-point recursion.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitMatrix {
    Identity,
    /// Trace-normalized sample covariance Σ x_i x_iᵀ / N. The default: the
    /// recursion's limit does not depend on the start, and the SCM points
    /// at the right neighborhood immediately.
    #[default]
    ScaledScm,
    UserSupplied(SpdMatrix),
}

/// Knobs of the fixed-point and Newton-Raphson iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Stopping threshold on the relative scatter step C(k).
    pub tol_c: f64,
    pub max_iter: usize,
    /// Known-shape mode when set: the β update is skipped entirely.
    pub beta_fixed: Option<f64>,
    pub beta_init: f64,
    pub init: InitMatrix,
    /// Newton steps are clipped to ±this before clamping.
    pub newton_max_step: f64,
    /// Working range for β; iterates are clamped into it.
    pub beta_clamp: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol_c: 1e-6,
            max_iter: 100,
            beta_fixed: None,
            beta_init: 0.5,
            init: InitMatrix::default(),
            newton_max_step: 0.2,
            beta_clamp: (BETA_MIN, BETA_MAX),
        }
    }
}

/// Estimates plus convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Scatter estimate, trace p.
    pub scatter: SpdMatrix,
    /// Scale estimate m̂.
    pub scale: f64,
    /// Shape estimate (or the fixed shape in known-β mode).
    pub beta: f64,
    /// Number of fixed-point updates performed; equals `c_trace.len()`.
    pub iterations: usize,
    /// Relative scatter step C(k) per iteration.
    pub c_trace: Vec<f64>,
    /// |α(β̂)| at the returned estimates.
    pub alpha_residual: f64,
    /// Whether the stopping criteria were met before `max_iter`.
    pub converged: bool,
    /// Final log F_χ.
    pub objective: f64,
}

/// Sufficient statistics of {y_i} at a given β, accumulated stably by
/// factoring out max(β ln y_i).
struct YStats {
    /// ln Σ y_i^β.
    log_sum: f64,
    /// Weighted mean of ln y with weights ∝ y^β.
    wmean_ln: f64,
    /// Weighted variance of ln y with weights ∝ y^β.
    wvar_ln: f64,
}

fn y_stats(y: &[f64], beta: f64) -> Result<YStats, EstimatorError> {
    let mut max = f64::NEG_INFINITY;
    for (i, yi) in y.iter().enumerate() {
        if !(yi.is_finite() && *yi >= Y_UNDERFLOW_GUARD) {
            return Err(EstimatorError::DegenerateData { index: i });
        }
        max = max.max(beta * yi.ln());
    }
    let mut z = 0.0;
    let mut mean = 0.0;
    for yi in y {
        let w = (beta * yi.ln() - max).exp();
        z += w;
        mean += w * yi.ln();
    }
    mean /= z;
    let mut var = 0.0;
    for yi in y {
        let w = (beta * yi.ln() - max).exp();
        var += w * (yi.ln() - mean) * (yi.ln() - mean);
    }
    var /= z;
    Ok(YStats {
        log_sum: max + z.ln(),
        wmean_ln: mean,
        wvar_ln: var,
    })
}

fn check_beta(beta: f64) -> Result<(), EstimatorError> {
    if !(beta.is_finite() && beta > 0.0 && beta <= 1.0) {
        return Err(EstimatorError::InvalidShape(beta));
    }
    Ok(())
}

/// One application of the fixed-point map f_χ.
pub fn fp_map(
    m: &SpdMatrix,
    data: &SampleSet,
    beta: f64,
) -> Result<SpdMatrix, EstimatorError> {
    check_beta(beta)?;
    let y = data.quadratic_forms(m)?;
    fp_map_from_y(&y, data, beta)
}

fn fp_map_from_y(
    y: &[f64],
    data: &SampleSet,
    beta: f64,
) -> Result<SpdMatrix, EstimatorError> {
    let p = data.dim();
    let stats = y_stats(y, beta)?;
    let log_p = (p as f64).ln();
    let mut acc = vec![0.0; p * p];
    for (x, yi) in data.iter_rows().zip(y) {
        // w_i = p · y_i^{β-1} / Σ_j y_j^β, in the log domain.
        let w = (log_p + (beta - 1.0) * yi.ln() - stats.log_sum).exp();
        for i in 0..p {
            let wxi = w * x[i];
            for j in i..p {
                acc[i * p + j] += wxi * x[j];
            }
        }
    }
    for i in 0..p {
        for j in (i + 1)..p {
            acc[j * p + i] = acc[i * p + j];
        }
    }
    Ok(SpdMatrix::new(p, acc)?)
}

/// Closed-form scale MLE m̂ = [β/(pN) Σ y_i^β]^{1/β} given the scatter.
pub fn estimate_scale(
    m: &SpdMatrix,
    data: &SampleSet,
    beta: f64,
) -> Result<f64, EstimatorError> {
    check_beta(beta)?;
    let y = data.quadratic_forms(m)?;
    estimate_scale_from_y(&y, data.dim(), beta)
}

fn estimate_scale_from_y(y: &[f64], p: usize, beta: f64) -> Result<f64, EstimatorError> {
    let stats = y_stats(y, beta)?;
    let n = y.len() as f64;
    let log_m = (beta.ln() - (p as f64 * n).ln() + stats.log_sum) / beta;
    Ok(log_m.exp())
}

/// The shape likelihood equation α(β), whose root is the shape MLE:
///
/// ```text
/// α(β) = pN/(2 Σ y^β) Σ y^β ln y − pN/(2β) [Ψ(p/(2β)) + ln 2]
///        − N − pN/(2β) ln(β/(pN) Σ y^β)
/// ```
pub fn alpha_equation(beta: f64, y: &[f64], p: usize) -> Result<f64, EstimatorError> {
    check_beta(beta)?;
    let stats = y_stats(y, beta)?;
    alpha_from_stats(beta, &stats, y.len(), p)
}

fn alpha_from_stats(
    beta: f64,
    stats: &YStats,
    n_samples: usize,
    p: usize,
) -> Result<f64, EstimatorError> {
    let n = n_samples as f64;
    let pf = p as f64;
    let a = pf / (2.0 * beta);
    let half_pn = 0.5 * pf * n;
    Ok(half_pn * stats.wmean_ln
        - (half_pn / beta) * (digamma(a).map_err(EstimatorError::Model)? + std::f64::consts::LN_2)
        - n
        - (half_pn / beta) * (beta.ln() - (pf * n).ln() + stats.log_sum))
}

/// Analytic α′(β), term-by-term derivative of the likelihood equation.
///
/// Validated against central finite differences in the test suite.
pub fn alpha_derivative(beta: f64, y: &[f64], p: usize) -> Result<f64, EstimatorError> {
    check_beta(beta)?;
    let stats = y_stats(y, beta)?;
    alpha_derivative_from_stats(beta, &stats, y.len(), p)
}

fn alpha_derivative_from_stats(
    beta: f64,
    stats: &YStats,
    n_samples: usize,
    p: usize,
) -> Result<f64, EstimatorError> {
    let n = n_samples as f64;
    let pf = p as f64;
    let a = pf / (2.0 * beta);
    let half_pn = 0.5 * pf * n;
    let psi = digamma(a).map_err(EstimatorError::Model)?;
    let psi1 = trigamma(a).map_err(EstimatorError::Model)?;
    // d/dβ of the weighted mean of ln y is the weighted variance.
    let t1 = half_pn * stats.wvar_ln;
    let t2 = (half_pn / (beta * beta)) * (a * psi1 + psi + std::f64::consts::LN_2);
    let log_arg = beta.ln() - (pf * n).ln() + stats.log_sum;
    let t3 = -(half_pn / (beta * beta)) * (1.0 + beta * stats.wmean_ln - log_arg);
    Ok(t1 + t2 + t3)
}

/// One safeguarded Newton-Raphson update β − α(β)/α′(β): the raw step is
/// clipped to ±`newton_max_step` and the result clamped to `beta_clamp`.
pub fn newton_beta_step(
    beta: f64,
    y: &[f64],
    p: usize,
    opts: &FitOptions,
) -> Result<f64, EstimatorError> {
    check_beta(beta)?;
    let stats = y_stats(y, beta)?;
    let alpha = alpha_from_stats(beta, &stats, y.len(), p)?;
    let deriv = alpha_derivative_from_stats(beta, &stats, y.len(), p)?;
    if deriv.abs() < ZERO_DERIVATIVE_GUARD {
        return Err(EstimatorError::ZeroDerivative { beta });
    }
    let step = (alpha / deriv).clamp(-opts.newton_max_step, opts.newton_max_step);
    Ok((beta - step).clamp(opts.beta_clamp.0, opts.beta_clamp.1))
}

/// Bisection fallback: scan the clamp range for a sign change of α and
/// bisect it. Returns None when no bracket exists.
fn bisect_alpha_root(
    y: &[f64],
    p: usize,
    opts: &FitOptions,
) -> Result<Option<f64>, EstimatorError> {
    let (lo, hi) = opts.beta_clamp;
    let mut prev_b = lo;
    let mut prev_a = alpha_equation(prev_b, y, p)?;
    let mut bracket = None;
    for k in 1..BISECTION_SCAN_POINTS {
        let b = lo + (hi - lo) * k as f64 / (BISECTION_SCAN_POINTS - 1) as f64;
        let a = alpha_equation(b, y, p)?;
        if prev_a == 0.0 {
            return Ok(Some(prev_b));
        }
        if a.signum() != prev_a.signum() {
            bracket = Some((prev_b, b, prev_a));
            break;
        }
        prev_b = b;
        prev_a = a;
    }
    let Some((mut lo_b, mut hi_b, lo_a)) = bracket else {
        return Ok(None);
    };
    for _ in 0..80 {
        let mid = 0.5 * (lo_b + hi_b);
        let a = alpha_equation(mid, y, p)?;
        if a == 0.0 {
            return Ok(Some(mid));
        }
        if a.signum() == lo_a.signum() {
            lo_b = mid;
        } else {
            hi_b = mid;
        }
    }
    Ok(Some(0.5 * (lo_b + hi_b)))
}

enum BetaMode {
    Known(f64),
    Estimated,
}

/// Fixed-point fit of the scatter at a known shape. Iterates
/// M_{k+1} = normalize_trace(f_χ(M_k)) from the normalized initialization
/// until C(k) < tol_c, returning the trace-p estimate; the scale m̂ is
/// computed from the final iterates. Not converging within `max_iter` is
/// reported through `converged = false`, not an error.
pub fn fit_scatter_fp(
    data: &SampleSet,
    beta: f64,
    opts: &FitOptions,
) -> Result<FitReport, EstimatorError> {
    check_beta(beta)?;
    run_fit(data, opts, BetaMode::Known(beta))
}

/// Joint fit of (M, m, β): alternates exactly one normalized fixed-point
/// update of the scatter with one Newton-Raphson update of the shape per
/// outer iteration, then computes m̂ from the closed form. With
/// `opts.beta_fixed` set this is exactly the known-shape path.
pub fn fit_joint(data: &SampleSet, opts: &FitOptions) -> Result<FitReport, EstimatorError> {
    match opts.beta_fixed {
        Some(beta) => {
            check_beta(beta)?;
            run_fit(data, opts, BetaMode::Known(beta))
        }
        None => run_fit(data, opts, BetaMode::Estimated),
    }
}

fn initial_matrix(data: &SampleSet, init: &InitMatrix) -> Result<SpdMatrix, EstimatorError> {
    let m = match init {
        InitMatrix::Identity => SpdMatrix::identity(data.dim()),
        InitMatrix::ScaledScm => sample_covariance(data)?,
        InitMatrix::UserSupplied(m0) => m0.clone(),
    };
    Ok(m.normalize_trace())
}

fn run_fit(
    data: &SampleSet,
    opts: &FitOptions,
    mode: BetaMode,
) -> Result<FitReport, EstimatorError> {
    data.validate_for_estimation()?;
    let p = data.dim();
    let mut m = initial_matrix(data, &opts.init)?;
    let (mut beta, estimating) = match mode {
        BetaMode::Known(b) => (b, false),
        BetaMode::Estimated => (
            opts.beta_init.clamp(opts.beta_clamp.0, opts.beta_clamp.1),
            true,
        ),
    };
    let mut c_trace = Vec::new();
    let mut converged = false;
    let mut beta_stalled = false;

    for _ in 0..opts.max_iter {
        let y = data.quadratic_forms(&m)?;
        let next = fp_map_from_y(&y, data, beta)?.normalize_trace();
        let c = rel_frobenius_dist(next.entries(), m.entries());
        c_trace.push(c);
        m = next;

        let mut beta_step = 0.0;
        if estimating {
            let y_next = data.quadratic_forms(&m)?;
            match newton_beta_step(beta, &y_next, p, opts) {
                Ok(b) => {
                    beta_step = (b - beta).abs();
                    beta = b;
                }
                Err(EstimatorError::ZeroDerivative { .. }) => {
                    match bisect_alpha_root(&y_next, p, opts)? {
                        Some(b) => {
                            beta_step = (b - beta).abs();
                            beta = b;
                        }
                        None => {
                            beta_stalled = true;
                            break;
                        }
                    }
                }
                Err(e) => return Err(e),
            }
        }

        if c < opts.tol_c && (!estimating || beta_step < opts.tol_c) {
            converged = true;
            break;
        }
    }

    let y = data.quadratic_forms(&m)?;
    let scale = estimate_scale_from_y(&y, p, beta)?;
    let stats = y_stats(&y, beta)?;
    let alpha_residual = alpha_from_stats(beta, &stats, y.len(), p)?.abs();
    let objective = -m.log_det() - (p as f64 / beta) * log_sum_y_beta(&y, beta)?;

    Ok(FitReport {
        scatter: m,
        scale,
        beta,
        iterations: c_trace.len(),
        c_trace,
        alpha_residual,
        converged: converged && !beta_stalled,
        objective,
    })
}

/// Relative Frobenius step sizes ‖A_{k+1} − A_k‖ / ‖A_k‖ of an iterate
/// sequence. Serves both C(k) on the normalized scatter iterates and D(k)
/// on scale-carrying iterates.
pub fn convergence_criteria(trace: &[SpdMatrix]) -> Result<Vec<f64>, EstimatorError> {
    if trace.len() < 2 {
        return Err(EstimatorError::EmptyTrace);
    }
    Ok(trace
        .windows(2)
        .map(|w| rel_frobenius_dist(w[1].entries(), w[0].entries()))
        .collect())
}

/// Iterates of the trace-normalized recursion together with the
/// scale-carrying sequence Â_k = m̂_k·M̂_k, stopping when the D(k) step of
/// the Â sequence falls below `tol_c` (or at `max_iter`).
pub fn normalized_recursion_iterates(
    data: &SampleSet,
    beta: f64,
    opts: &FitOptions,
) -> Result<(Vec<SpdMatrix>, Vec<SpdMatrix>), EstimatorError> {
    check_beta(beta)?;
    data.validate_for_estimation()?;
    let mut m = initial_matrix(data, &opts.init)?;
    let mut scatter_iterates = vec![m.clone()];
    let mut scale_iterates = vec![m.scaled(estimate_scale(&m, data, beta)?)?];
    for _ in 0..opts.max_iter {
        m = fp_map(&m, data, beta)?.normalize_trace();
        scatter_iterates.push(m.clone());
        let a = m.scaled(estimate_scale(&m, data, beta)?)?;
        let d = rel_frobenius_dist(
            a.entries(),
            scale_iterates.last().expect("nonempty").entries(),
        );
        scale_iterates.push(a);
        if d < opts.tol_c {
            break;
        }
    }
    Ok((scatter_iterates, scale_iterates))
}

/// Iterates of the unnormalized comparator: the scatter recursion in the
/// Σ parametrization (scale absorbed, no per-step trace renormalization),
///
/// ```text
/// Σ_{k+1} = (β/N) Σ_i x_i x_iᵀ / (x_iᵀ Σ_k⁻¹ x_i)^{1-β},
/// ```
///
/// started from the raw sample covariance. Its fixed point is the full MLE
/// Σ̂ = m̂·M̂; the scale component relaxes geometrically at rate 1−β, which
/// is what makes this recursion visibly slower than the normalized one.
pub fn unnormalized_recursion_iterates(
    data: &SampleSet,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<SpdMatrix>, EstimatorError> {
    check_beta(beta)?;
    data.validate_for_estimation()?;
    let p = data.dim();
    let n = data.count() as f64;
    let mut sigma = sample_covariance(data)?;
    let mut iterates = vec![sigma.clone()];
    for _ in 0..max_iter {
        let y = data.quadratic_forms(&sigma)?;
        for (i, yi) in y.iter().enumerate() {
            if !(yi.is_finite() && *yi >= Y_UNDERFLOW_GUARD) {
                return Err(EstimatorError::DegenerateData { index: i });
            }
        }
        let mut acc = vec![0.0; p * p];
        for (x, yi) in data.iter_rows().zip(&y) {
            let w = (beta / n) * ((beta - 1.0) * yi.ln()).exp();
            for i in 0..p {
                let wxi = w * x[i];
                for j in i..p {
                    acc[i * p + j] += wxi * x[j];
                }
            }
        }
        for i in 0..p {
            for j in (i + 1)..p {
                acc[j * p + i] = acc[i * p + j];
            }
        }
        let next = SpdMatrix::new(p, acc)?;
        let d = rel_frobenius_dist(next.entries(), sigma.entries());
        sigma = next;
        iterates.push(sigma.clone());
        if d < tol {
            break;
        }
    }
    Ok(iterates)
}
