//! Monte-Carlo averaging of exact efficiencies over sketch draws.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::efficiency::{EfficiencyContext, EfficiencyReport, Metric};
use crate::error::{Error, Result};
use crate::regression::{DesignMatrix, TestPointPolicy};
use crate::rng::derive_seed;
use crate::sketch::{draw_sketch, with_retries, SketchMethod, SketchOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig {
    pub reps: usize,
    pub root_seed: u64,
    pub options: SketchOptions,
    /// Spread replicates over the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl MonteCarloConfig {
    pub fn new(reps: usize, root_seed: u64) -> Self {
        Self {
            reps,
            root_seed,
            options: SketchOptions::default(),
            parallel: false,
        }
    }
}

/// Location and spread of one metric across replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation (divisor `k − 1`); zero for one replicate.
    pub sd: f64,
    pub q05: f64,
    pub q95: f64,
}

/// Nearest-rank quantile of sorted data: element `⌈qN⌉ − 1`.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Summary statistics. Values are sorted first, so the result does not
/// depend on the order in which replicates finished.
pub fn summarize(values: &[f64]) -> Result<MetricSummary> {
    if values.is_empty() {
        return Err(Error::invalid("cannot summarize zero replicates"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / k;
    let sd = if sorted.len() > 1 {
        (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(MetricSummary {
        mean,
        sd,
        q05: nearest_rank(&sorted, 0.05),
        q95: nearest_rank(&sorted, 0.95),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub ve: MetricSummary,
    pub pe: MetricSummary,
    pub re: MetricSummary,
    pub oe: MetricSummary,
    pub replicates: usize,
    pub root_seed: u64,
    /// Draws rejected as rank deficient and redrawn with a fresh seed.
    pub retries: usize,
    /// Mean realized sketch size `r̃`.
    pub mean_rows: f64,
}

impl MonteCarloSummary {
    pub fn get(&self, metric: Metric) -> &MetricSummary {
        match metric {
            Metric::Ve => &self.ve,
            Metric::Pe => &self.pe,
            Metric::Re => &self.re,
            Metric::Oe => &self.oe,
        }
    }
}

/// Outcome of one replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replicate {
    pub report: EfficiencyReport,
    pub retries: usize,
    pub rows: usize,
}

/// Aggregates replicates.
pub fn summarize_replicates(reps: &[Replicate], root_seed: u64) -> Result<MonteCarloSummary> {
    let column = |m: Metric| -> Vec<f64> { reps.iter().map(|r| r.report.get(m)).collect() };
    Ok(MonteCarloSummary {
        ve: summarize(&column(Metric::Ve))?,
        pe: summarize(&column(Metric::Pe))?,
        re: summarize(&column(Metric::Re))?,
        oe: summarize(&column(Metric::Oe))?,
        replicates: reps.len(),
        root_seed,
        retries: reps.iter().map(|r| r.retries).sum(),
        mean_rows: reps.iter().map(|r| r.rows as f64).sum::<f64>() / reps.len().max(1) as f64,
    })
}

/// One draw of `method` at size `r`, retried on rank failures.
pub fn replicate(
    ctx: &EfficiencyContext<'_>,
    method: SketchMethod,
    r: usize,
    seed: u64,
    options: &SketchOptions,
) -> Result<Replicate> {
    let ((report, rows), retries) = with_retries(seed, |s| {
        let op = draw_sketch(method, ctx.design(), r, s, options)?;
        Ok((ctx.evaluate(&op)?, op.realized_rows()))
    })?;
    Ok(Replicate {
        report,
        retries,
        rows,
    })
}

/// Runs `f(k)` for `k = 0..reps`, optionally in parallel, keeping index order.
pub fn run_indexed<T, F>(reps: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..reps as u64).into_par_iter().map(&f).collect()
    } else {
        (0..reps as u64).map(f).collect()
    }
}

/// Draws `config.reps` sketches with seeds `derive_seed(root, k)` and
/// summarizes their exact efficiencies on the fixed design `x`.
pub fn monte_carlo_efficiency(
    x: &DesignMatrix,
    method: SketchMethod,
    r: usize,
    config: &MonteCarloConfig,
    test_points: &TestPointPolicy,
) -> Result<MonteCarloSummary> {
    if config.reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    let ctx = EfficiencyContext::new(x, test_points)?;
    let reps = run_indexed(config.reps, config.parallel, |k| {
        replicate(&ctx, method, r, derive_seed(config.root_seed, k), &config.options)
    })?;
    summarize_replicates(&reps, config.root_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::generate_gaussian_design;
    use crate::theory::{predict_orthogonal, AspectRatios};

    #[test]
    fn summary_statistics() {
        let s = summarize(&[3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!((s.q05, s.q95), (1.0, 4.0));
        let one = summarize(&[7.0]).unwrap();
        assert_eq!((one.mean, one.sd, one.q05, one.q95), (7.0, 0.0, 7.0, 7.0));
        let ten: Vec<f64> = (1..=10).map(f64::from).collect();
        let s = summarize(&ten).unwrap();
        assert_eq!((s.q05, s.q95), (1.0, 10.0));
        let twenty: Vec<f64> = (1..=20).map(f64::from).collect();
        let s = summarize(&twenty).unwrap();
        assert_eq!((s.q05, s.q95), (1.0, 19.0));
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn order_independent() {
        let v = [0.3, 1e-17, 5.0, 2.2, 1e16, -4.0];
        let mut w = v;
        w.reverse();
        assert_eq!(summarize(&v).unwrap(), summarize(&w).unwrap());
    }

    #[test]
    fn single_replicate_matches_report() {
        let x = generate_gaussian_design(40, 3, None, 1).unwrap();
        let tp = TestPointPolicy::identity(3);
        let cfg = MonteCarloConfig::new(1, 9);
        let s = monte_carlo_efficiency(&x, SketchMethod::Gaussian, 20, &cfg, &tp).unwrap();
        let op = crate::sketch::gaussian_sketch(40, 20, derive_seed(9, 0)).unwrap();
        let rep = crate::efficiency::finite_sample_efficiencies(&x, &op, &tp).unwrap();
        assert_eq!(s.ve.mean, rep.ve);
        assert_eq!(s.ve.sd, 0.0);
        assert_eq!(s.replicates, 1);
    }

    #[test]
    fn deterministic_and_parallel_invariant() {
        let x = generate_gaussian_design(64, 4, None, 2).unwrap();
        let tp = TestPointPolicy::identity(4);
        let mut cfg = MonteCarloConfig::new(8, 5);
        let a = monte_carlo_efficiency(&x, SketchMethod::Srht, 32, &cfg, &tp).unwrap();
        let b = monte_carlo_efficiency(&x, SketchMethod::Srht, 32, &cfg, &tp).unwrap();
        cfg.parallel = true;
        let c = monte_carlo_efficiency(&x, SketchMethod::Srht, 32, &cfg, &tp).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(a.ve.q05 <= a.ve.q95);
    }

    #[test]
    fn haar_mean_matches_limit() {
        let (n, p, r) = (1024, 51, 512);
        let x = generate_gaussian_design(n, p, None, 3).unwrap();
        let s = monte_carlo_efficiency(&x, SketchMethod::Haar, r, &MonteCarloConfig::new(10, 1), &TestPointPolicy::identity(p))
            .unwrap();
        let theory = predict_orthogonal(AspectRatios::from_dims(n, p, r).unwrap()).ve;
        assert!((s.ve.mean - theory).abs() / theory < 0.05, "{} vs {theory}", s.ve.mean);
    }
}
