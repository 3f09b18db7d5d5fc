//! Log-gamma, digamma and trigamma for positive arguments.
//!
//! All three use the same scheme: shift the argument above 10 with the
//! functional recurrence, then apply the Stirling asymptotic series with
//! Bernoulli-number coefficients. Absolute error stays below 1e-12 across
//! [0.05, 200], comfortably inside the 1e-10 contract the estimators need.

use crate::model::ModelError;

const SHIFT_THRESHOLD: f64 = 10.0;
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

fn check_positive(a: f64) -> Result<(), ModelError> {
    if !(a.is_finite() && a > 0.0) {
        return Err(ModelError::NonPositiveArgument(a));
    }
    Ok(())
}

/// ln Γ(a) for a > 0.
pub fn log_gamma(a: f64) -> Result<f64, ModelError> {
    check_positive(a)?;
    let mut x = a;
    let mut shift = 0.0;
    while x < SHIFT_THRESHOLD {
        shift -= x.ln();
        x += 1.0;
    }
    // Stirling: (x - 1/2) ln x - x + ln(2π)/2 + Σ B_{2n} / (2n(2n-1) x^{2n-1}).
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2 * (-1.0 / 1680.0 + inv2 * (1.0 / 1188.0 - inv2 * 691.0 / 360360.0)))));
    Ok((x - 0.5) * x.ln() - x + HALF_LN_TWO_PI + series + shift)
}

/// Digamma ψ(a) = d/da ln Γ(a) for a > 0.
pub fn digamma(a: f64) -> Result<f64, ModelError> {
    check_positive(a)?;
    let mut x = a;
    let mut shift = 0.0;
    // ψ(x) = ψ(x + 1) - 1/x.
    while x < SHIFT_THRESHOLD {
        shift -= 1.0 / x;
        x += 1.0;
    }
    // ψ(x) = ln x - 1/(2x) - Σ B_{2n} / (2n x^{2n}).
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 120.0
                    + inv2 * (1.0 / 252.0 + inv2 * (-1.0 / 240.0 + inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
    Ok(x.ln() - 0.5 * inv - series + shift)
}

/// Trigamma ψ′(a) for a > 0.
pub fn trigamma(a: f64) -> Result<f64, ModelError> {
    check_positive(a)?;
    let mut x = a;
    let mut shift = 0.0;
    // ψ′(x) = ψ′(x + 1) + 1/x².
    while x < SHIFT_THRESHOLD {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    // ψ′(x) = 1/x + 1/(2x²) + Σ B_{2n} / x^{2n+1}.
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * inv2
        * (1.0 / 6.0
            + inv2
                * (-1.0 / 30.0
                    + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0 - inv2 * 691.0 / 2730.0)))));
    Ok(inv + 0.5 * inv2 + series + shift)
}
