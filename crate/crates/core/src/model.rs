//! The MGGD density, log-likelihood, and profile objective.
//!
//! The density of the family on ℝᵖ is
//!
//! ```text
//! p(x | M, m, β) = |M|^{-1/2} h_{m,β}(xᵀ M⁻¹ x)
//! h_{m,β}(y)     = β Γ(p/2) / (π^{p/2} Γ(p/(2β)) 2^{p/(2β)}) · m^{-p/2} · exp(-y^β / (2 m^β))
//! ```
//!
//! with scatter M normalized to trace p, scale m > 0 and shape β. β = 1 is
//! the multivariate Gaussian and β = 0.5 the multivariate Laplace. All
//! likelihood quantities are evaluated in the log domain: y^{p/β} exponents
//! reach ±hundreds for small β, so sums of y_i^β are accumulated through
//! log-sum-exp.
//!
//! The theory behind the estimators covers β ∈ (0, 1), and fitting clamps β
//! to [0.01, 0.99]; evaluation accepts the closed β = 1 endpoint so the
//! Gaussian case stays available as a test hook.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spd::{SpdError, SpdMatrix};
use crate::special::log_gamma;

/// Lower end of the shape working range used by the estimators.
pub const BETA_MIN: f64 = 0.01;
/// Upper end of the shape working range used by the estimators.
pub const BETA_MAX: f64 = 0.99;

/// Tolerance on |Tr(M) − p| for model parameters.
const TRACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("argument must be positive, got {0}")]
    NonPositiveArgument(f64),

    #[error("shape must lie in (0, 1], got {0}")]
    InvalidShape(f64),

    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),

    #[error("scatter trace must equal the dimension: |{trace} - {dim}| > {TRACE_TOL:e}")]
    TraceNotNormalized { trace: f64, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample {index} is degenerate (zero or vanishing quadratic form)")]
    DegenerateData { index: usize },

    #[error("sample {index} has {got} coordinates, expected {expected}")]
    RaggedRow {
        index: usize,
        expected: usize,
        got: usize,
    },

    #[error("sample {index} contains a non-finite value")]
    NonFiniteSample { index: usize },

    #[error("estimation needs at least p + 1 = {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("data matrix is rank deficient; scatter estimation is ill-posed")]
    RankDeficient,

    #[error(transparent)]
    Linalg(#[from] SpdError),
}

/// MGGD parameter triple (M, m, β) with Tr(M) = p.
#[derive(Debug, Clone, PartialEq)]
pub struct MggdParams {
    scatter: SpdMatrix,
    scale: f64,
    shape: f64,
}

impl MggdParams {
    /// Validates Tr(M) = p within 1e-9, m > 0 finite, β ∈ (0, 1].
    pub fn new(scatter: SpdMatrix, scale_m: f64, shape_beta: f64) -> Result<Self, ModelError> {
        let p = scatter.dim() as f64;
        let trace = scatter.trace();
        if (trace - p).abs() > TRACE_TOL {
            return Err(ModelError::TraceNotNormalized {
                trace,
                dim: scatter.dim(),
            });
        }
        if !(scale_m.is_finite() && scale_m > 0.0) {
            return Err(ModelError::InvalidScale(scale_m));
        }
        if !(shape_beta.is_finite() && shape_beta > 0.0 && shape_beta <= 1.0) {
            return Err(ModelError::InvalidShape(shape_beta));
        }
        Ok(Self {
            scatter,
            scale: scale_m,
            shape: shape_beta,
        })
    }

    pub fn dim(&self) -> usize {
        self.scatter.dim()
    }

    pub fn scatter(&self) -> &SpdMatrix {
        &self.scatter
    }

    pub fn scale_m(&self) -> f64 {
        self.scale
    }

    pub fn shape_beta(&self) -> f64 {
        self.shape
    }
}

/// N observation vectors of dimension p, stored row-major.
///
/// Construction rejects non-finite values and zero rows. Estimators
/// additionally require `validate_for_estimation`, which enforces
/// N ≥ p + 1 together with a rank-p check of the data matrix. The full
/// "every p-subset is linearly independent" hypothesis is combinatorial;
/// it holds almost surely for continuous data, and the rank check plus the
/// sample-count floor is the working proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if !data.len().is_multiple_of(dim) {
            return Err(ModelError::DimensionMismatch {
                expected: dim * (data.len() / dim + 1),
                got: data.len(),
            });
        }
        let set = Self { dim, data };
        for (i, row) in set.iter_rows().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFiniteSample { index: i });
            }
            if row.iter().all(|v| *v == 0.0) {
                return Err(ModelError::DegenerateData { index: i });
            }
        }
        Ok(set)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(ModelError::RaggedRow {
                    index: i,
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// N ≥ p + 1 plus a rank-p check of the data matrix.
    pub fn validate_for_estimation(&self) -> Result<(), ModelError> {
        if self.count() < self.dim + 1 {
            return Err(ModelError::TooFewSamples {
                needed: self.dim + 1,
                got: self.count(),
            });
        }
        sample_covariance(self).map(|_| ())
    }

    /// Batched quadratic forms y_i = x_iᵀ M⁻¹ x_i.
    pub fn quadratic_forms(&self, m: &SpdMatrix) -> Result<Vec<f64>, ModelError> {
        if m.dim() != self.dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim,
                got: m.dim(),
            });
        }
        let mut buf = vec![0.0; self.dim];
        Ok(self
            .iter_rows()
            .map(|x| m.quadratic_form_with_buf(x, &mut buf))
            .collect())
    }
}

/// Sample covariance Σ x_i x_iᵀ / N. Fails with `RankDeficient` when the
/// data matrix does not have full column rank.
pub fn sample_covariance(data: &SampleSet) -> Result<SpdMatrix, ModelError> {
    let p = data.dim();
    let n = data.count() as f64;
    let mut acc = vec![0.0; p * p];
    for x in data.iter_rows() {
        for i in 0..p {
            let xi = x[i];
            for j in i..p {
                acc[i * p + j] += xi * x[j];
            }
        }
    }
    for i in 0..p {
        for j in i..p {
            let v = acc[i * p + j] / n;
            acc[i * p + j] = v;
            acc[j * p + i] = v;
        }
    }
    SpdMatrix::new(p, acc).map_err(|e| match e {
        SpdError::NotPositiveDefinite { .. } => ModelError::RankDeficient,
        other => ModelError::Linalg(other),
    })
}

fn check_shape(beta: f64) -> Result<(), ModelError> {
    if !(beta.is_finite() && beta > 0.0 && beta <= 1.0) {
        return Err(ModelError::InvalidShape(beta));
    }
    Ok(())
}

/// log h_{m,β}(y): the density generator in the log domain.
pub fn log_density_generator(y: f64, m: f64, beta: f64, p: usize) -> Result<f64, ModelError> {
    if !(y.is_finite() && y >= 0.0) {
        return Err(ModelError::NonPositiveArgument(y));
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(ModelError::InvalidScale(m));
    }
    check_shape(beta)?;
    let pf = p as f64;
    let a = pf / (2.0 * beta);
    let log_const = beta.ln() + log_gamma(pf / 2.0)?
        - (pf / 2.0) * std::f64::consts::PI.ln()
        - log_gamma(a)?
        - a * std::f64::consts::LN_2
        - (pf / 2.0) * m.ln();
    // y^β / (2 m^β) = exp(β (ln y − ln m)) / 2, and 0 at y = 0.
    let tail = if y == 0.0 {
        0.0
    } else {
        0.5 * (beta * (y.ln() - m.ln())).exp()
    };
    Ok(log_const - tail)
}

/// The density generator h_{m,β}(y).
pub fn density_generator(y: f64, m: f64, beta: f64, p: usize) -> Result<f64, ModelError> {
    Ok(log_density_generator(y, m, beta, p)?.exp())
}

/// Log density of x under the MGGD parameters.
pub fn log_pdf(x: &[f64], params: &MggdParams) -> Result<f64, ModelError> {
    if x.len() != params.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: params.dim(),
            got: x.len(),
        });
    }
    let y = params.scatter.quadratic_form(x)?;
    Ok(-0.5 * params.scatter.log_det()
        + log_density_generator(y, params.scale, params.shape, params.dim())?)
}

/// ln Σ_i exp(v_i), stable under large magnitudes.
pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// ln Σ_i y_i^β by log-sum-exp over β ln y_i.
///
/// Fails with `DegenerateData` (carrying the sample index) when some y_i
/// is zero or negative.
pub fn log_sum_y_beta(y: &[f64], beta: f64) -> Result<f64, ModelError> {
    for (i, yi) in y.iter().enumerate() {
        if !(yi.is_finite() && *yi > 0.0) {
            return Err(ModelError::DegenerateData { index: i });
        }
    }
    Ok(log_sum_exp(y.iter().map(move |yi| beta * yi.ln())))
}

/// log F_χ(M) = −log|M| − (p/β) log Σ_i y_i^β, the profile log-likelihood of
/// the scatter with the scale replaced by its closed-form maximizer.
///
/// Homogeneous of degree zero in M.
pub fn log_profile_objective(
    m: &SpdMatrix,
    data: &SampleSet,
    beta: f64,
) -> Result<f64, ModelError> {
    check_shape(beta)?;
    let y = data.quadratic_forms(m)?;
    let lse = log_sum_y_beta(&y, beta)?;
    Ok(-m.log_det() - (m.dim() as f64 / beta) * lse)
}
