//! Asymptotic efficiency predictions.
//!
//! Every predictor takes the aspect ratios `γ = p/n` and `ξ = r/n` (or the
//! raw dimensions for the exact Gaussian result) and returns a
//! [`TheoryReport`]. No closed form for RE is stated for the individual
//! sketches; it is obtained from PE through the trace identity behind the
//! finite-sample formula, `RE = (1 − 2γ + γ·PE)/(1 − γ)`.

pub mod closed_form;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::efficiency::Metric;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AspectRatios {
    gamma: f64,
    xi: f64,
}

impl AspectRatios {
    /// Requires `0 < γ < ξ ≤ 1`.
    pub fn new(gamma: f64, xi: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < xi && xi <= 1.0) {
            return Err(Error::invalid(format!(
                "aspect ratios must satisfy 0 < gamma < xi <= 1, got gamma={gamma}, xi={xi}"
            )));
        }
        Ok(Self { gamma, xi })
    }

    pub fn from_dims(n: usize, p: usize, r: usize) -> Result<Self> {
        Self::new(p as f64 / n as f64, r as f64 / n as f64)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub ve: f64,
    pub pe: f64,
    pub re: f64,
    pub oe: f64,
}

impl TheoryReport {
    fn with_derived_re(gamma: f64, ve: f64, pe: f64, oe: f64) -> Self {
        Self {
            ve,
            pe,
            re: re_from_pe(gamma, pe),
            oe,
        }
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Ve => self.ve,
            Metric::Pe => self.pe,
            Metric::Re => self.re,
            Metric::Oe => self.oe,
        }
    }
}

/// `RE = (1 − 2γ + γ·PE)/(1 − γ)`.
pub fn re_from_pe(gamma: f64, pe: f64) -> f64 {
    (1.0 - 2.0 * gamma + gamma * pe) / (1.0 - gamma)
}

/// Exact VE = PE for an `r × n` Gaussian sketch; OE uses the large-sample
/// approximation `(nr − p²)/(n(r − p))`.
pub fn predict_gaussian_finite(n: usize, p: usize, r: usize) -> Result<TheoryReport> {
    if p == 0 || n <= p || r > n || r < p + 2 {
        return Err(Error::Precondition(format!(
            "need r - p > 1 and p < n, r <= n; got n={n}, p={p}, r={r}"
        )));
    }
    let (n, p, r) = (n as f64, p as f64, r as f64);
    let ve = 1.0 + (n - p) / (r - p - 1.0);
    let oe = (n * r - p * p) / (n * (r - p));
    Ok(TheoryReport::with_derived_re(p / n, ve, ve, oe))
}

/// Limits for iid sketches.
pub fn predict_iid(a: AspectRatios) -> TheoryReport {
    let (g, x) = (a.gamma, a.xi);
    let ve = 1.0 + (1.0 - g) / (x - g);
    TheoryReport {
        ve,
        pe: ve,
        re: x / (x - g),
        oe: (x - g * g) / (x - g),
    }
}

/// Limits shared by Haar projections, the SRHT and uniform sampling of a
/// rotationally invariant design.
pub fn predict_orthogonal(a: AspectRatios) -> TheoryReport {
    let (g, x) = (a.gamma, a.xi);
    let ve = (1.0 - g) / (x - g);
    let oe = (1.0 - g) / (1.0 - g / x);
    TheoryReport::with_derived_re(g, ve, ve, oe)
}

/// Out-of-sample efficiency of an orthogonal sketch, `r(n − p)/(n(r − p))`,
/// as a reduced fraction.
pub fn orthogonal_oe_rational(n: u64, p: u64, r: u64) -> Result<(u128, u128)> {
    if !(p < r && r <= n) {
        return Err(Error::invalid(format!("need p < r <= n, got n={n}, p={p}, r={r}")));
    }
    let num = r as u128 * (n - p) as u128;
    let den = n as u128 * (r - p) as u128;
    let g = gcd(num, den);
    Ok((num / g, den / g))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Keep probabilities of a row-sampling scheme that depends on the row scale.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingRule {
    /// One probability per atom of the `w²` law, in atom order.
    Probabilities(Vec<f64>),
    /// Leverage sampling: `π = min((ξ/γ)(1 − 1/(1 + w² η⁻¹(1 − γ))), 1)`.
    Leverage,
}

/// Per-atom keep probabilities of the leverage rule, before clipping.
pub fn leverage_probabilities(w2: &DiscreteDistribution, a: AspectRatios) -> Result<Vec<f64>> {
    let z0 = w2.eta_inverse(1.0 - a.gamma)?;
    let ratio = a.xi / a.gamma;
    Ok(w2
        .atoms()
        .iter()
        .map(|&atom| ratio * (1.0 - 1.0 / (1.0 + atom * z0)))
        .collect())
}

fn infeasible(y: f64) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::OutOfRange { lower, .. } => Error::Infeasible(format!(
            "the kept law leaves mass {lower:.6} at zero, so η cannot reach {y:.6}; \
             zero mass must stay below the target (too few rows kept relative to p)"
        )),
        other => other,
    }
}

/// Limits for independent row sampling on an elliptical design whose squared
/// scales follow `w2`.
pub fn predict_elliptical_sampling(
    w2: &DiscreteDistribution,
    rule: &SamplingRule,
    a: AspectRatios,
) -> Result<TheoryReport> {
    let g = a.gamma;
    let z0 = w2.eta_inverse(1.0 - g)?;
    let probs: Vec<f64> = match rule {
        SamplingRule::Leverage => leverage_probabilities(w2, a)?
            .into_iter()
            .map(|p| p.min(1.0))
            .collect(),
        SamplingRule::Probabilities(p) => {
            if p.len() != w2.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} probabilities for {} atoms",
                    p.len(),
                    w2.len()
                )));
            }
            if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::invalid("keep probabilities must lie in [0, 1]"));
            }
            p.clone()
        }
    };
    let mut pairs = Vec::with_capacity(2 * w2.len());
    let mut dropped = 0.0;
    for ((atom, w), &pi) in w2.iter().zip(&probs) {
        pairs.push((atom, w * pi));
        pairs.push((0.0, w * (1.0 - pi)));
        dropped += w * atom * (1.0 - pi);
    }
    let sw2 = DiscreteDistribution::from_parts_normalized(pairs)?;
    let y = 1.0 - g;
    let zs = sw2.eta_inverse(y).map_err(infeasible(y))?;
    let m = w2.mean();
    let ve = zs / z0;
    let pe = 1.0 + dropped * zs / g;
    let oe = (1.0 + m * zs) / (1.0 + m * z0);
    Ok(TheoryReport::with_derived_re(g, ve, pe, oe))
}

/// Argument at which the truncated law's η is inverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GreedyArgument {
    OneMinusGamma,
    OneMinusGammaOverXi,
}

/// Whether the truncated law keeps the dropped mass as an atom at zero or is
/// rescaled to total mass one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruncatedLaw {
    SubProbability,
    Renormalized,
}

/// Expectation used for the dropped-scale term in PE: over the full law of
/// `w²` (`E[w² 1{w² < q}]`) or conditional on being dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DroppedExpectation {
    Joint,
    Conditional,
}

/// Evaluation convention for the greedy-leverage limits.
///
/// `(OneMinusGamma, SubProbability)` and `(OneMinusGammaOverXi, Renormalized)`
/// give the same root, since `η_sub(z) = (1 − ξ) + ξ η_renorm(z)`. Mixing the
/// two yields different numbers; the default is the combination that agrees
/// with simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyConvention {
    pub argument: GreedyArgument,
    pub law: TruncatedLaw,
    pub dropped: DroppedExpectation,
}

impl Default for GreedyConvention {
    fn default() -> Self {
        Self {
            argument: GreedyArgument::OneMinusGammaOverXi,
            law: TruncatedLaw::Renormalized,
            dropped: DroppedExpectation::Joint,
        }
    }
}

impl GreedyConvention {
    /// All eight combinations.
    pub fn all() -> Vec<GreedyConvention> {
        let mut out = Vec::with_capacity(8);
        for argument in [GreedyArgument::OneMinusGamma, GreedyArgument::OneMinusGammaOverXi] {
            for law in [TruncatedLaw::SubProbability, TruncatedLaw::Renormalized] {
                for dropped in [DroppedExpectation::Joint, DroppedExpectation::Conditional] {
                    out.push(GreedyConvention {
                        argument,
                        law,
                        dropped,
                    });
                }
            }
        }
        out
    }

    /// Convention built from the argument alone, with the law paired so the
    /// root is consistent and the joint expectation.
    pub fn from_argument(argument: GreedyArgument) -> Self {
        let law = match argument {
            GreedyArgument::OneMinusGamma => TruncatedLaw::SubProbability,
            GreedyArgument::OneMinusGammaOverXi => TruncatedLaw::Renormalized,
        };
        Self {
            argument,
            law,
            dropped: DroppedExpectation::Joint,
        }
    }
}

impl fmt::Display for GreedyArgument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::OneMinusGamma => "one-minus-gamma",
            Self::OneMinusGammaOverXi => "one-minus-gamma-over-xi",
        })
    }
}

impl FromStr for GreedyArgument {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "one-minus-gamma" | "1-gamma" => Ok(Self::OneMinusGamma),
            "one-minus-gamma-over-xi" | "1-gamma/xi" => Ok(Self::OneMinusGammaOverXi),
            other => Err(Error::invalid(format!("unknown greedy argument convention `{other}`"))),
        }
    }
}

impl fmt::Display for TruncatedLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SubProbability => "sub-probability",
            Self::Renormalized => "renormalized",
        })
    }
}

impl FromStr for TruncatedLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "sub-probability" | "sub" => Ok(Self::SubProbability),
            "renormalized" | "renorm" => Ok(Self::Renormalized),
            other => Err(Error::invalid(format!("unknown truncated-law convention `{other}`"))),
        }
    }
}

impl fmt::Display for DroppedExpectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Joint => "joint",
            Self::Conditional => "conditional",
        })
    }
}

impl FromStr for DroppedExpectation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "joint" => Ok(Self::Joint),
            "conditional" => Ok(Self::Conditional),
            other => Err(Error::invalid(format!("unknown expectation convention `{other}`"))),
        }
    }
}

impl fmt::Display for GreedyConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.argument, self.law, self.dropped)
    }
}

/// Keeps the top `xi` mass of `w2`, splitting the atom that straddles the
/// quantile. Returns `(kept, dropped)` as `(atom, mass)` lists.
pub fn truncate_top(w2: &DiscreteDistribution, xi: f64) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let mut remaining = xi;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (atom, w) in w2.iter().collect::<Vec<_>>().into_iter().rev() {
        let take = w.min(remaining.max(0.0));
        remaining -= take;
        if take > 0.0 {
            kept.push((atom, take));
        }
        if w - take > 0.0 {
            dropped.push((atom, w - take));
        }
    }
    (kept, dropped)
}

/// Limits for keeping the `r` rows with the largest leverage scores on an
/// elliptical design whose squared scales follow `w2`.
pub fn predict_greedy_leverage(
    w2: &DiscreteDistribution,
    a: AspectRatios,
    convention: GreedyConvention,
) -> Result<TheoryReport> {
    let (g, xi) = (a.gamma, a.xi);
    let z0 = w2.eta_inverse(1.0 - g)?;
    let (kept, dropped) = truncate_top(w2, xi);
    let kept_mass: f64 = kept.iter().map(|k| k.1).sum();
    let law = match convention.law {
        TruncatedLaw::SubProbability => {
            let mut pairs = kept.clone();
            pairs.push((0.0, (1.0 - kept_mass).max(0.0)));
            DiscreteDistribution::from_parts_normalized(pairs)?
        }
        TruncatedLaw::Renormalized => DiscreteDistribution::from_parts_normalized(kept.clone())?,
    };
    let y = match convention.argument {
        GreedyArgument::OneMinusGamma => 1.0 - g,
        GreedyArgument::OneMinusGammaOverXi => 1.0 - g / xi,
    };
    let zt = law.eta_inverse(y).map_err(infeasible(y))?;
    let joint: f64 = dropped.iter().map(|(atom, w)| atom * w).sum();
    let dropped_term = match convention.dropped {
        DroppedExpectation::Joint => joint,
        DroppedExpectation::Conditional if 1.0 - kept_mass > 0.0 => joint / (1.0 - kept_mass),
        DroppedExpectation::Conditional => 0.0,
    };
    let m = w2.mean();
    let ve = zt / z0;
    let pe = 1.0 + dropped_term * zt / g;
    let oe = (1.0 + m * zt) / (1.0 + m * z0);
    Ok(TheoryReport::with_derived_re(g, ve, pe, oe))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundFamily {
    Subgaussian,
    Hadamard,
}

impl FromStr for BoundFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "subgaussian" | "gaussian" => Ok(Self::Subgaussian),
            "hadamard" | "srht" => Ok(Self::Hadamard),
            other => Err(Error::invalid(format!("unknown bound family `{other}`"))),
        }
    }
}

/// Earlier high-probability upper bounds on PE and RE. Logarithms are natural.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorBounds {
    pub pe: f64,
    pub re: f64,
}

pub fn prior_bounds(n: usize, p: usize, r: usize, family: BoundFamily) -> PriorBounds {
    let (n, p, r) = (n as f64, p as f64, r as f64);
    match family {
        BoundFamily::Subgaussian => PriorBounds {
            pe: 44.0 * (1.0 + n / r),
            re: 1.0 + 44.0 * p / r,
        },
        BoundFamily::Hadamard => {
            let l = (n * p).ln();
            PriorBounds {
                pe: 1.0 + 40.0 * l * (1.0 + p / r),
                re: 40.0 * l * (1.0 + n / r),
            }
        }
    }
}

/// Marchenko–Pastur Stieltjes transform at zero, `m(0) = 1/(1 − γ)`.
pub fn mp_stieltjes_zero(gamma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    Ok(1.0 / (1.0 - gamma))
}
