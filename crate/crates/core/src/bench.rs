//! Wall-clock timing of full OLS against sketch-and-solve, and the linear
//! cost model fitted to those timings.
//!
//! Timings are taken one at a time: a process-wide latch makes concurrent
//! sessions fail instead of contaminating each other.

use std::io::Write;
use std::sync::{Mutex, MutexGuard, TryLockError};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::{lstsq, DesignMatrix};
use crate::sketch::{apply_sketch, draw_sketch, SketchMethod, SketchOptions};

static LATCH: Mutex<()> = Mutex::new(());

/// Exclusive right to take timings in this process.
pub struct TimingSession {
    _guard: MutexGuard<'static, ()>,
}

impl TimingSession {
    /// Fails with [`Error::TimingBusy`] if another session is alive.
    pub fn acquire() -> Result<Self> {
        match LATCH.try_lock() {
            Ok(guard) => Ok(Self { _guard: guard }),
            Err(TryLockError::Poisoned(p)) => Ok(Self {
                _guard: p.into_inner(),
            }),
            Err(TryLockError::WouldBlock) => Err(Error::TimingBusy),
        }
    }

    /// Blocks until the latch is free.
    pub fn wait() -> Self {
        Self {
            _guard: LATCH.lock().unwrap_or_else(|p| p.into_inner()),
        }
    }
}

/// What is being timed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimedMethod {
    Full,
    Sketch(SketchMethod),
}

impl TimedMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Sketch(m) => m.as_str(),
        }
    }
}

impl std::str::FromStr for TimedMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" | "ols" => Ok(Self::Full),
            other => other.parse().map(Self::Sketch),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub method: TimedMethod,
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub median_seconds: f64,
    pub iqr_seconds: f64,
}

fn quartiles(mut v: Vec<f64>) -> (f64, f64, f64) {
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
        v[rank - 1]
    };
    let median = if v.len() % 2 == 1 {
        v[v.len() / 2]
    } else {
        0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
    };
    (at(0.25), median, at(0.75))
}

/// Median and interquartile range of `reps` end-to-end solves after one
/// untimed warm-up. For a sketch the clock covers drawing the operator,
/// applying it and solving the reduced problem.
pub fn time_solve(
    _session: &TimingSession,
    x: &DesignMatrix,
    y: &[f64],
    method: TimedMethod,
    r: usize,
    reps: usize,
    seed: u64,
) -> Result<TimingRecord> {
    if reps < 3 {
        return Err(Error::invalid("timing needs at least 3 repetitions"));
    }
    let options = SketchOptions::default();
    let run = |k: u64| -> Result<()> {
        match method {
            TimedMethod::Full => {
                std::hint::black_box(lstsq(x.matrix(), y)?);
            }
            TimedMethod::Sketch(m) => {
                let op = draw_sketch(m, x, r, crate::rng::derive_seed(seed, k), &options)?;
                let prob = apply_sketch(&op, x, y)?;
                std::hint::black_box(prob.solve()?);
            }
        }
        Ok(())
    };
    run(u64::MAX)?;
    let mut samples = Vec::with_capacity(reps);
    for k in 0..reps as u64 {
        let start = Instant::now();
        run(k)?;
        samples.push(start.elapsed().as_secs_f64());
    }
    let (q1, median, q3) = quartiles(samples);
    Ok(TimingRecord {
        method,
        n: x.nrows(),
        p: x.ncols(),
        r: if method == TimedMethod::Full { x.nrows() } else { r },
        median_seconds: median,
        iqr_seconds: q3 - q1,
    })
}

/// `t_full = a_full·np²`, `t_srht = a_fwht·np·ln n + a_solve·rp²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub a_full: f64,
    pub a_fwht: f64,
    pub a_solve: f64,
}

impl CostModel {
    /// Constants measured on a 2.5 GHz laptop; a historical profile, not a
    /// property of this machine.
    pub fn reference_profile() -> Self {
        Self {
            a_full: 4e-11,
            a_fwht: 2e-8,
            a_solve: 4e-11,
        }
    }

    pub fn full_time(&self, n: usize, p: usize) -> f64 {
        self.a_full * n as f64 * (p as f64).powi(2)
    }

    pub fn sketch_time(&self, n: usize, p: usize, r: usize) -> f64 {
        let (n, p, r) = (n as f64, p as f64, r as f64);
        self.a_fwht * n * p * n.ln() + self.a_solve * r * p * p
    }

    pub fn predict(&self, method: TimedMethod, n: usize, p: usize, r: usize) -> f64 {
        match method {
            TimedMethod::Full => self.full_time(n, p),
            TimedMethod::Sketch(_) => self.sketch_time(n, p, r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResidual {
    pub method: TimedMethod,
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub measured: f64,
    pub predicted: f64,
    /// `(predicted − measured)/measured`.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFit {
    pub model: CostModel,
    pub residuals: Vec<FitResidual>,
}

/// Least squares in relative error, so small and large grid points count
/// equally. `full` records determine `a_full`; all sketch records determine
/// `(a_fwht, a_solve)`. A negative transform coefficient is clamped to zero
/// and `a_solve` refitted alone.
pub fn fit_cost_model(records: &[TimingRecord]) -> Result<CostFit> {
    let full: Vec<&TimingRecord> = records.iter().filter(|r| r.method == TimedMethod::Full).collect();
    let sketch: Vec<&TimingRecord> = records.iter().filter(|r| r.method != TimedMethod::Full).collect();
    if full.is_empty() || sketch.len() < 2 {
        return Err(Error::invalid(
            "under-determined grid: need at least one full and two sketch timings",
        ));
    }
    if records.iter().any(|r| !(r.median_seconds > 0.0)) {
        return Err(Error::invalid("timings must be positive"));
    }
    // Relative least squares with one regressor: a = Σ(f/t) / Σ(f/t)².
    let fit_one = |rows: &[(f64, f64)]| {
        let num: f64 = rows.iter().map(|(f, t)| f / t).sum();
        let den: f64 = rows.iter().map(|(f, t)| (f / t).powi(2)).sum();
        num / den
    };
    let a_full = fit_one(
        &full
            .iter()
            .map(|r| (r.n as f64 * (r.p as f64).powi(2), r.median_seconds))
            .collect::<Vec<_>>(),
    );
    let features: Vec<[f64; 2]> = sketch
        .iter()
        .map(|r| {
            let (n, p, rr) = (r.n as f64, r.p as f64, r.r as f64);
            [n * p * n.ln(), rr * p * p]
        })
        .collect();
    let design = faer::Mat::from_fn(sketch.len(), 2, |i, j| features[i][j] / sketch[i].median_seconds);
    let ones = vec![1.0; sketch.len()];
    let (mut a_fwht, mut a_solve) = match lstsq(design.as_ref(), &ones) {
        Ok(c) => (c[0], c[1]),
        Err(Error::RankDeficient { .. }) => {
            return Err(Error::invalid(
                "under-determined grid: sketch timings do not separate transform and solve cost",
            ))
        }
        Err(e) => return Err(e),
    };
    if a_fwht < 0.0 {
        a_fwht = 0.0;
        a_solve = fit_one(
            &sketch
                .iter()
                .zip(&features)
                .map(|(r, f)| (f[1], r.median_seconds))
                .collect::<Vec<_>>(),
        );
    }
    let model = CostModel {
        a_full,
        a_fwht,
        a_solve,
    };
    let residuals = records
        .iter()
        .map(|r| {
            let predicted = model.predict(r.method, r.n, r.p, r.r);
            FitResidual {
                method: r.method,
                n: r.n,
                p: r.p,
                r: r.r,
                measured: r.median_seconds,
                predicted,
                relative: (predicted - r.median_seconds) / r.median_seconds,
            }
        })
        .collect();
    Ok(CostFit { model, residuals })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakEven {
    /// Largest sketch size whose predicted time is at most `c` times the
    /// full solve, capped at `n`.
    pub r: f64,
    /// Out-of-sample efficiency `r(n − p)/(n(r − p))` at that size, the best
    /// accuracy attainable within the budget.
    pub oe_lower_bound: f64,
}

/// Break-even sketch size for a time budget of `c` times a full solve.
pub fn break_even_r(model: &CostModel, n: usize, p: usize, c: f64) -> Result<BreakEven> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::invalid(format!("budget fraction c must lie in (0, 1], got {c}")));
    }
    if p == 0 || n <= p {
        return Err(Error::invalid(format!("need n > p >= 1, got n={n}, p={p}")));
    }
    if !(model.a_full > 0.0 && model.a_solve > 0.0 && model.a_fwht >= 0.0) {
        return Err(Error::invalid("cost coefficients must be positive"));
    }
    let (nf, pf) = (n as f64, p as f64);
    let budget = c * model.full_time(n, p);
    let transform = model.a_fwht * nf * pf * nf.ln();
    let r = ((budget - transform) / (model.a_solve * pf * pf)).min(nf);
    if !(r > pf) {
        return Err(Error::Infeasible(format!(
            "with c={c} the transform alone leaves room for at most r={r:.1} rows, not more than p={p}"
        )));
    }
    Ok(BreakEven {
        r,
        oe_lower_bound: r * (nf - pf) / (nf * (r - pf)),
    })
}

/// CSV with columns `method,n,p,r,median_seconds,iqr_seconds`.
pub fn write_timing_csv<W: Write>(records: &[TimingRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "n", "p", "r", "median_seconds", "iqr_seconds"])?;
    for r in records {
        w.write_record([
            r.method.as_str().to_string(),
            r.n.to_string(),
            r.p.to_string(),
            r.r.to_string(),
            format!("{:e}", r.median_seconds),
            format!("{:e}", r.iqr_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}
