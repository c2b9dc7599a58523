//! Finite discrete laws and their η-transform.
//!
//! `η_F(z) = Σ_k w_k / (1 + z a_k)` is exact on atoms, which is why every
//! elliptical-sampling prediction is expressed on a [`DiscreteDistribution`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_TOLERANCE: f64 = 1e-12;

/// A probability law on finitely many nonnegative atoms.
///
/// Atoms are sorted ascending and unique; weights are strictly positive and
/// sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds a law from `(atom, weight)` lists. Zero weights are dropped and
    /// duplicate atoms merged.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let mut pairs = Vec::with_capacity(atoms.len());
        for (&a, &w) in atoms.iter().zip(&weights) {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::invalid(format!("atom {a} must be finite and nonnegative")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid(format!("weight {w} must be finite and nonnegative")));
            }
            if w > 0.0 {
                pairs.push((a, w));
            }
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if pairs.is_empty() || (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match atoms.last() {
                Some(&last) if last == a => *weights.last_mut().unwrap() += w,
                _ => {
                    atoms.push(a);
                    weights.push(w);
                }
            }
        }
        Ok(Self { atoms, weights })
    }

    pub fn point_mass(atom: f64) -> Result<Self> {
        Self::new(vec![atom], vec![1.0])
    }

    /// Equal mixture of two atoms.
    pub fn two_point(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![0.5, 0.5])
    }

    /// Empirical law of a sample, each observation carrying weight `1/len`.
    pub fn empirical(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empty sample"));
        }
        let w = 1.0 / samples.len() as f64;
        let mut d = Self::new(samples.to_vec(), vec![w; samples.len()]);
        if let Err(Error::InvalidParameter(_)) = d {
            // Rounding of n·(1/n) can exceed the tolerance for huge n.
            let total = w * samples.len() as f64;
            d = Self::new(samples.to_vec(), vec![w / total; samples.len()]);
        }
        d
    }

    /// Internal constructor for mixtures whose weights are correct up to
    /// rounding; renormalizes instead of rejecting.
    pub(crate) fn from_parts_normalized(pairs: Vec<(f64, f64)>) -> Result<Self> {
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if !(total > 0.0) {
            return Err(Error::invalid("mixture has no mass"));
        }
        let (atoms, weights) = pairs.into_iter().map(|(a, w)| (a, w / total)).unzip();
        Self::new(atoms, weights)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(a, w)| a * w).sum()
    }

    /// Mass sitting on the atom at zero.
    pub fn zero_mass(&self) -> f64 {
        match self.atoms.first() {
            Some(&0.0) => self.weights[0],
            _ => 0.0,
        }
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, w) in self.iter() {
            acc += w;
            if u < acc {
                return a;
            }
        }
        *self.atoms.last().unwrap()
    }

    /// `η(z) = E[1 / (1 + z X)]`.
    pub fn eta(&self, z: f64) -> f64 {
        self.iter().map(|(a, w)| w / (1.0 + z * a)).sum()
    }

    /// The unique `z ≥ 0` with `η(z) = y`.
    ///
    /// η decreases from 1 at `z = 0` to the zero-atom mass as `z → ∞`, so `y`
    /// must lie strictly between those two values. The root is bracketed by
    /// doubling an upper bound from 1 and refined by bisection to full
    /// floating-point resolution.
    pub fn eta_inverse(&self, y: f64) -> Result<f64> {
        let lower = self.zero_mass();
        if !(y > lower && y < 1.0) {
            return Err(Error::OutOfRange { value: y, lower });
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.eta(hi) > y {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Numerical("η-inverse bracket diverged".into()));
            }
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = self.eta(mid);
            if v == y {
                return Ok(mid);
            }
            if v > y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (elo, ehi) = (self.eta(lo) - y, y - self.eta(hi));
        Ok(if elo.abs() <= ehi.abs() { lo } else { hi })
    }
}
