//! Explicit solutions for the equal-weight two-point scale law
//! `w² ∈ {d₁², d₂²}` with probability ½ each.
//!
//! These serve as independent checks on the generic bisection in
//! [`DiscreteDistribution::eta_inverse`](crate::DiscreteDistribution::eta_inverse).

use crate::error::{Error, Result};

fn check(d1sq: f64, d2sq: f64, gamma: f64) -> Result<()> {
    if !(d1sq > 0.0 && d2sq > 0.0) {
        return Err(Error::invalid("two-point atoms must be positive"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}

/// Root of `ab z² + B z − γ/(1 − γ) = 0` with `B = a + b − (a + b)/(2(1 − γ))`,
/// i.e. `η⁻¹(1 − γ)` for the two-point law.
pub fn two_point_eta_inverse(d1sq: f64, d2sq: f64, gamma: f64) -> Result<f64> {
    check(d1sq, d2sq, gamma)?;
    let (a, b) = (d1sq, d2sq);
    let y = 1.0 - gamma;
    let lin = a + b - (a + b) / (2.0 * y);
    let disc = lin * lin + 4.0 * a * b * gamma / y;
    Ok(positive_root(a * b, lin, disc))
}

/// `(−B + √disc)/(2A)` evaluated without cancellation when `B > 0`.
fn positive_root(a: f64, b: f64, disc: f64) -> f64 {
    let s = disc.sqrt();
    if b > 0.0 {
        // (−B + √D)/(2A) = (D − B²)/(2A(B + √D)).
        (disc - b * b) / (2.0 * a * (b + s))
    } else {
        (s - b) / (2.0 * a)
    }
}

/// Unclipped leverage-sampling probabilities `(π₁, π₂)` of the two atoms.
pub fn two_point_leverage_probabilities(d1sq: f64, d2sq: f64, gamma: f64, xi: f64) -> Result<(f64, f64)> {
    let z = two_point_eta_inverse(d1sq, d2sq, gamma)?;
    let ratio = xi / gamma;
    Ok((
        ratio * (1.0 - 1.0 / (1.0 + d1sq * z)),
        ratio * (1.0 - 1.0 / (1.0 + d2sq * z)),
    ))
}

/// `η⁻¹(1 − γ/ξ)` of the renormalized top-`ξ` truncation, for `d₁² < d₂²`.
///
/// For `ξ ≤ ½` only the large atom survives and the root is
/// `γ/(d₂²(ξ − γ))`. Otherwise the law is `(1 − 1/(2ξ)) δ_{d₁²} + 1/(2ξ) δ_{d₂²}`.
pub fn two_point_greedy_eta_inverse(d1sq: f64, d2sq: f64, gamma: f64, xi: f64) -> Result<f64> {
    check(d1sq, d2sq, gamma)?;
    if !(d1sq < d2sq) {
        return Err(Error::invalid("expected d1² < d2²"));
    }
    if !(xi > gamma && xi <= 1.0) {
        return Err(Error::invalid(format!("need gamma < xi <= 1, got xi={xi}")));
    }
    let (a, b) = (d1sq, d2sq);
    if xi <= 0.5 {
        return Ok(gamma / (b * (xi - gamma)));
    }
    let lin = a + b - ((2.0 * xi - 1.0) * b + a) / (2.0 * (xi - gamma));
    let disc = lin * lin + 4.0 * a * b * gamma / (xi - gamma);
    Ok(positive_root(a * b, lin, disc))
}
