//! Shared helpers for the integration suites: an inverse-based likelihood
//! oracle that avoids the production Cholesky path, and a small structural
//! validator for the shipped report schema.

#![allow(dead_code)]

use mggd::model::SampleSet;
use mggd::spd::SpdMatrix;
use serde_json::Value;

/// Gauss-Jordan inverse with partial pivoting, plus log|det|.
///
/// Works on general (not necessarily symmetric) matrices, which lets the
/// finite-difference probes perturb single entries. Panics on singular
/// input; test matrices are kept well conditioned.
pub fn gauss_inverse(dim: usize, entries: &[f64]) -> (Vec<f64>, f64) {
    let mut a = entries.to_vec();
    let mut inv = vec![0.0; dim * dim];
    for i in 0..dim {
        inv[i * dim + i] = 1.0;
    }
    let mut log_det = 0.0;
    let mut sign = 1.0;
    for col in 0..dim {
        let pivot_row = (col..dim)
            .max_by(|&r1, &r2| {
                a[r1 * dim + col]
                    .abs()
                    .partial_cmp(&a[r2 * dim + col].abs())
                    .unwrap()
            })
            .unwrap();
        if pivot_row != col {
            for j in 0..dim {
                a.swap(col * dim + j, pivot_row * dim + j);
                inv.swap(col * dim + j, pivot_row * dim + j);
            }
            sign = -sign;
        }
        let pivot = a[col * dim + col];
        assert!(pivot != 0.0, "singular matrix in test oracle");
        sign *= pivot.signum();
        log_det += pivot.abs().ln();
        for j in 0..dim {
            a[col * dim + j] /= pivot;
            inv[col * dim + j] /= pivot;
        }
        for row in 0..dim {
            if row == col {
                continue;
            }
            let factor = a[row * dim + col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..dim {
                a[row * dim + j] -= factor * a[col * dim + j];
                inv[row * dim + j] -= factor * inv[col * dim + j];
            }
        }
    }
    assert!(sign > 0.0, "negative determinant in test oracle");
    (inv, log_det)
}

/// log F_χ(M) = −log|M| − (p/β) log Σ y_i^β evaluated entirely through the
/// explicit inverse: an independent route from the production solver.
pub fn log_profile_via_inverse(dim: usize, entries: &[f64], data: &SampleSet, beta: f64) -> f64 {
    let (inv, log_det) = gauss_inverse(dim, entries);
    let mut log_terms: Vec<f64> = Vec::with_capacity(data.count());
    for x in data.iter_rows() {
        let mut y = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                y += x[i] * inv[i * dim + j] * x[j];
            }
        }
        assert!(y > 0.0, "nonpositive quadratic form in test oracle");
        log_terms.push(beta * y.ln());
    }
    let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + log_terms.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    -log_det - (dim as f64 / beta) * lse
}

/// Frobenius distance helpers on raw entries.
pub fn frob(entries: &[f64]) -> f64 {
    entries.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn rel_dist(a: &SpdMatrix, b: &SpdMatrix) -> f64 {
    let num: f64 = a
        .entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    num / b.frobenius_norm()
}

pub fn frob_err(a: &SpdMatrix, b: &SpdMatrix) -> f64 {
    a.entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Relative Frobenius error between the analytic gradient of the profile
/// objective, F·M⁻¹(f_χ(M) − M)·M⁻¹ evaluated at F/F₀ = 1, and central
/// finite differences of F/F₀ computed through the explicit-inverse oracle
/// with single-entry perturbations.
pub fn gradient_identity_rel_err(m: &SpdMatrix, data: &SampleSet, beta: f64) -> f64 {
    let p = m.dim();
    let log_f0 = log_profile_via_inverse(p, m.entries(), data, beta);
    let (inv, _) = gauss_inverse(p, m.entries());
    let f = mggd::estimator::fp_map(m, data, beta).unwrap();

    let diff: Vec<f64> = f
        .entries()
        .iter()
        .zip(m.entries())
        .map(|(a, b)| a - b)
        .collect();
    let mut tmp = vec![0.0; p * p];
    let mut analytic = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            let mut s = 0.0;
            for k in 0..p {
                s += inv[i * p + k] * diff[k * p + j];
            }
            tmp[i * p + j] = s;
        }
    }
    for i in 0..p {
        for j in 0..p {
            let mut s = 0.0;
            for k in 0..p {
                s += tmp[i * p + k] * inv[k * p + j];
            }
            analytic[i * p + j] = s;
        }
    }

    let mut fd = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            let h = 1e-5 * (1.0 + m.get(i, j).abs());
            let mut plus = m.entries().to_vec();
            let mut minus = m.entries().to_vec();
            plus[i * p + j] += h;
            minus[i * p + j] -= h;
            let f_plus = (log_profile_via_inverse(p, &plus, data, beta) - log_f0).exp();
            let f_minus = (log_profile_via_inverse(p, &minus, data, beta) - log_f0).exp();
            fd[i * p + j] = (f_plus - f_minus) / (2.0 * h);
        }
    }

    let num: f64 = fd
        .iter()
        .zip(&analytic)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let den: f64 = analytic.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den
}

/// Validates a JSON value against the structural subset of JSON Schema the
/// shipped report schema uses: `type`, `required`, `properties`, `items`,
/// with `type` either a string or a list of alternatives.
pub fn validate_schema(value: &Value, schema: &Value, path: &str) -> Result<(), String> {
    if let Some(ty) = schema.get("type") {
        let allowed: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().filter_map(|v| v.as_str()).collect(),
            _ => return Err(format!("{path}: malformed schema type")),
        };
        let matches = allowed.iter().any(|t| match *t {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_i64() || value.is_u64(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            _ => false,
        });
        if !matches {
            return Err(format!("{path}: expected type {allowed:?}, got {value}"));
        }
    }
    if let Some(required) = schema.get("required").and_then(Value::as_array) {
        for key in required.iter().filter_map(Value::as_str) {
            if value.get(key).is_none() {
                return Err(format!("{path}: missing required field \"{key}\""));
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        for (key, sub) in props {
            if let Some(field) = value.get(key) {
                validate_schema(field, sub, &format!("{path}.{key}"))?;
            }
        }
    }
    if let Some(items) = schema.get("items") {
        if let Some(list) = value.as_array() {
            for (i, item) in list.iter().enumerate() {
                validate_schema(item, items, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}
