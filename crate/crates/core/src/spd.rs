//! Dense symmetric positive-definite kernel for small matrices.
//!
//! Everything the estimators need from linear algebra lives here: Cholesky
//! factorization, quadratic forms through triangular solves, trace
//! normalization, Loewner-order checks via a symmetric Jacobi eigensolver,
//! and the exponential-decay Toeplitz scatter used by the experiment
//! scenarios. Inverses are never formed explicitly; every `M⁻¹` application
//! goes through the cached Cholesky factor.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Relative asymmetry below which a matrix is symmetrized by averaging,
/// above which construction is rejected.
const SYMMETRY_REJECT_TOL: f64 = 1e-9;

/// Errors from the dense SPD kernel.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpdError {
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("toeplitz correlation must lie in [0, 1), got {0}")]
    InvalidRho(f64),

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {delta:e}")]
    NotSymmetric { i: usize, j: usize, delta: f64 },

    #[error("matrix entries must be finite")]
    NotFinite,

    #[error("trace must be positive, got {0}")]
    NonPositiveTrace(f64),

    #[error("dimension must be at least 1")]
    EmptyMatrix,
}

/// Dense symmetric positive-definite matrix with its lower-triangular
/// Cholesky factor computed at construction.
///
/// Entries are stored row-major. Construction symmetrizes benign
/// floating-point asymmetry (below `1e-9` relative) by averaging and rejects
/// anything larger, then factorizes; a failed factorization means the input
/// was not positive definite. Values are immutable afterwards, so sharing
/// across threads is safe.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    dim: usize,
    entries: Vec<f64>,
    /// Lower-triangular Cholesky factor L with M = L·Lᵀ, row-major,
    /// entries above the diagonal zero.
    chol: Vec<f64>,
}

impl SpdMatrix {
    /// Builds a matrix from row-major entries, enforcing the type invariants.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self, SpdError> {
        if dim == 0 {
            return Err(SpdError::EmptyMatrix);
        }
        if entries.len() != dim * dim {
            return Err(SpdError::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(SpdError::NotFinite);
        }
        let mut sym = entries;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = sym[i * dim + j];
                let b = sym[j * dim + i];
                let delta = (a - b).abs();
                let scale = 1.0_f64.max(a.abs());
                if delta > SYMMETRY_REJECT_TOL * scale {
                    return Err(SpdError::NotSymmetric { i, j, delta });
                }
                let avg = 0.5 * (a + b);
                sym[i * dim + j] = avg;
                sym[j * dim + i] = avg;
            }
        }
        let chol = cholesky(dim, &sym)?;
        Ok(Self {
            dim,
            entries: sym,
            chol,
        })
    }

    /// Builds a matrix from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpdError> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(SpdError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(dim, entries)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self {
            dim,
            entries,
            chol: {
                let mut l = vec![0.0; dim * dim];
                for i in 0..dim {
                    l[i * dim + i] = 1.0;
                }
                l
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.entries[i * self.dim..(i + 1) * self.dim].to_vec())
            .collect()
    }

    /// The lower-triangular Cholesky factor L with L·Lᵀ = M, row-major.
    pub fn cholesky_factor(&self) -> &[f64] {
        &self.chol
    }

    /// A matrix square root A with A·Aᵀ = M.
    ///
    /// This is the Cholesky factor, not the symmetric square root; any
    /// right-orthogonal change of factor yields the same distribution for
    /// `A·u` with `u` uniform on the sphere, and the Cholesky factor is
    /// already available.
    pub fn factor_sqrt(&self) -> Vec<f64> {
        self.chol.clone()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// log |M| from the Cholesky diagonal.
    pub fn log_det(&self) -> f64 {
        (0..self.dim)
            .map(|i| 2.0 * self.chol[i * self.dim + i].ln())
            .sum()
    }

    /// xᵀ M⁻¹ x through a forward triangular solve. Zero iff x = 0.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64, SpdError> {
        if x.len() != self.dim {
            return Err(SpdError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut z = vec![0.0; self.dim];
        Ok(self.quadratic_form_with_buf(x, &mut z))
    }

    /// Quadratic form with a caller-provided solve buffer of length `dim`,
    /// for batched evaluation over many samples.
    pub(crate) fn quadratic_form_with_buf(&self, x: &[f64], z: &mut [f64]) -> f64 {
        let p = self.dim;
        // Solve L z = x; then xᵀM⁻¹x = zᵀz.
        let mut q = 0.0;
        for i in 0..p {
            let mut s = x[i];
            for (k, zk) in z.iter().enumerate().take(i) {
                s -= self.chol[i * p + k] * zk;
            }
            let zi = s / self.chol[i * p + i];
            z[i] = zi;
            q += zi * zi;
        }
        q
    }

    /// Scales the matrix by a positive constant, reusing the factor.
    pub fn scaled(&self, c: f64) -> Result<Self, SpdError> {
        if !(c.is_finite() && c > 0.0) {
            return Err(SpdError::NonPositiveTrace(c));
        }
        let sqrt_c = c.sqrt();
        Ok(Self {
            dim: self.dim,
            entries: self.entries.iter().map(|v| v * c).collect(),
            chol: self.chol.iter().map(|v| v * sqrt_c).collect(),
        })
    }

    /// Rescales to trace p, leaving the trace within 1e-13 of p. A matrix
    /// already inside that window is returned unchanged, which makes the
    /// operation idempotent bitwise: one pass lands within a few ulps of p,
    /// comfortably inside the window.
    pub fn normalize_trace(&self) -> Self {
        let p = self.dim as f64;
        let tr = self.trace();
        if (tr - p).abs() <= 1e-13 {
            return self.clone();
        }
        self.scaled(p / tr)
            .expect("trace of an SPD matrix is positive")
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Lower-triangular Cholesky factorization of row-major symmetric `entries`.
///
/// Fails with `NotPositiveDefinite` when a pivot is not strictly positive,
/// which signals a boundary or indefinite input.
pub fn cholesky(dim: usize, entries: &[f64]) -> Result<Vec<f64>, SpdError> {
    if entries.len() != dim * dim {
        return Err(SpdError::DimensionMismatch {
            expected: dim * dim,
            got: entries.len(),
        });
    }
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut s = entries[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(SpdError::NotPositiveDefinite { index: i, pivot: s });
                }
                l[i * dim + i] = s.sqrt();
            } else {
                l[i * dim + j] = s / l[j * dim + j];
            }
        }
    }
    Ok(l)
}

/// The exponential-decay Toeplitz scatter M(i,j) = ρ^|i−j|, ρ ∈ [0, 1).
///
/// The diagonal is all ones, so the trace equals p by construction.
pub fn toeplitz_rho(p: usize, rho: f64) -> Result<SpdMatrix, SpdError> {
    if !(rho.is_finite() && (0.0..1.0).contains(&rho)) {
        return Err(SpdError::InvalidRho(rho));
    }
    if p == 0 {
        return Err(SpdError::EmptyMatrix);
    }
    let mut entries = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            entries[i * p + j] = rho.powi((i as i32 - j as i32).abs());
        }
    }
    SpdMatrix::new(p, entries)
}

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
pub fn min_symmetric_eigenvalue(dim: usize, entries: &[f64]) -> Result<f64, SpdError> {
    if dim == 0 {
        return Err(SpdError::EmptyMatrix);
    }
    if entries.len() != dim * dim {
        return Err(SpdError::DimensionMismatch {
            expected: dim * dim,
            got: entries.len(),
        });
    }
    if dim == 1 {
        return Ok(entries[0]);
    }
    let mut a = entries.to_vec();
    let scale = frobenius_norm(&a).max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                off += a[i * dim + j] * a[i * dim + j];
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for pi in 0..dim {
            for qi in (pi + 1)..dim {
                let apq = a[pi * dim + qi];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[qi * dim + qi] - a[pi * dim + pi]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let akp = a[k * dim + pi];
                    let akq = a[k * dim + qi];
                    a[k * dim + pi] = c * akp - s * akq;
                    a[k * dim + qi] = s * akp + c * akq;
                }
                for k in 0..dim {
                    let apk = a[pi * dim + k];
                    let aqk = a[qi * dim + k];
                    a[pi * dim + k] = c * apk - s * aqk;
                    a[qi * dim + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let min = (0..dim)
        .map(|i| a[i * dim + i])
        .fold(f64::INFINITY, f64::min);
    Ok(min)
}

/// Loewner comparison: true iff the smallest eigenvalue of A − B is ≥ −tol.
pub fn loewner_geq(a: &SpdMatrix, b: &SpdMatrix, tol: f64) -> Result<bool, SpdError> {
    if a.dim() != b.dim() {
        return Err(SpdError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let diff: Vec<f64> = a
        .entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| x - y)
        .collect();
    Ok(min_symmetric_eigenvalue(a.dim(), &diff)? >= -tol)
}

/// Frobenius norm of a raw row-major matrix.
pub fn frobenius_norm(entries: &[f64]) -> f64 {
    entries.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// ‖A − B‖_F / ‖B‖_F on raw row-major entries of equal shape.
pub fn rel_frobenius_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let num = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    num / frobenius_norm(b)
}

/// Random SPD probe G·Gᵀ + 0.1·I with G a p×p standard-normal draw.
///
/// Used for randomized initializations and property probes; the ridge keeps
/// the draws well conditioned.
pub fn random_spd<R: Rng + ?Sized>(p: usize, rng: &mut R) -> SpdMatrix {
    let g: Vec<f64> = (0..p * p).map(|_| rng.sample(StandardNormal)).collect();
    let mut entries = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            let mut s = 0.0;
            for k in 0..p {
                s += g[i * p + k] * g[j * p + k];
            }
            entries[i * p + j] = s;
        }
    }
    for i in 0..p {
        entries[i * p + i] += 0.1;
    }
    SpdMatrix::new(p, entries).expect("G·Gᵀ + 0.1·I is positive definite")
}
