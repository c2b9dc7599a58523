//! Declarative sweeps over sketch methods and sizes, joined with the matching
//! asymptotic predictions.

pub mod config;

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::PathBuf;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::efficiency::{EfficiencyContext, Metric};
use crate::error::{Error, Result};
use crate::linalg;
use crate::montecarlo::{replicate, run_indexed, summarize_replicates, Replicate};
use crate::regression::{
    generate_elliptical_design, generate_gaussian_design, load_csv_standardize, DesignMatrix,
    EllipticalSpec, ScaleLaw, TestPointPolicy,
};
use crate::rng::{derive_seed, stream};
use crate::sketch::{SketchMethod, SketchOptions};
use crate::theory::{
    predict_elliptical_sampling, predict_gaussian_finite, predict_greedy_leverage, predict_iid,
    predict_orthogonal, AspectRatios, GreedyConvention, SamplingRule, TheoryReport,
};

pub use config::RunConfig;

#[derive(Debug, Clone)]
pub enum DataSource {
    /// Rows `Σ^{1/2} z_i`; `None` means `Σ = I`.
    Gaussian { sigma_factor: Option<Mat<f64>> },
    Elliptical(EllipticalSpec),
    /// Standardized columns of a CSV file.
    Csv { path: PathBuf, response: String },
}

#[derive(Debug, Clone)]
pub struct ExperimentGrid {
    pub n: usize,
    pub p: usize,
    pub r_values: Vec<usize>,
    pub methods: Vec<SketchMethod>,
    pub reps: usize,
    pub root_seed: u64,
    pub data_source: DataSource,
    pub metrics: Vec<Metric>,
    /// Draw a fresh design for every replicate instead of fixing one.
    pub redraw_design: bool,
    pub greedy: GreedyConvention,
    pub options: SketchOptions,
    pub parallel: bool,
}

impl ExperimentGrid {
    pub fn new(n: usize, p: usize, r_values: Vec<usize>, methods: Vec<SketchMethod>) -> Self {
        Self {
            n,
            p,
            r_values,
            methods,
            reps: 10,
            root_seed: 0,
            data_source: DataSource::Gaussian { sigma_factor: None },
            metrics: Metric::ALL.to_vec(),
            redraw_design: false,
            greedy: GreedyConvention::default(),
            options: SketchOptions::default(),
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::invalid("no sketch methods given"));
        }
        if self.metrics.is_empty() {
            return Err(Error::invalid("no metrics given"));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        if self.r_values.is_empty() {
            return Err(Error::invalid("no sketch sizes given"));
        }
        if !matches!(self.data_source, DataSource::Csv { .. }) {
            if self.p == 0 || self.n <= self.p {
                return Err(Error::invalid(format!("need n > p >= 1, got n={}, p={}", self.n, self.p)));
            }
            self.check_sizes(self.n, self.p)?;
        }
        Ok(())
    }

    fn check_sizes(&self, n: usize, p: usize) -> Result<()> {
        if let Some(&r) = self.r_values.iter().find(|&&r| r <= p || r > n) {
            return Err(Error::invalid(format!("sketch size r={r} must satisfy p < r <= n (p={p}, n={n})")));
        }
        Ok(())
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: SketchMethod,
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub gamma: f64,
    pub xi: f64,
    pub metric: Metric,
    pub empirical_mean: f64,
    pub empirical_sd: f64,
    pub empirical_q05: f64,
    pub empirical_q95: f64,
    pub theory_value: Option<f64>,
    pub replicates: usize,
    /// Power of two the SRHT padded to, when `n` is not one.
    pub padded_n: Option<usize>,
    pub mean_rows: f64,
    pub retries: usize,
    pub note: String,
}

/// A realized design with what the theory and the test-point policy need.
struct Realized {
    x: DesignMatrix,
    test_points: TestPointPolicy,
    /// Law of `w²` used for the sampling predictions; `None` for real data.
    scale_law: Option<DiscreteDistribution>,
    scale_note: &'static str,
}

fn second_moment(factor: Option<&Mat<f64>>, p: usize, scale: f64) -> Mat<f64> {
    match factor {
        Some(f) => {
            let s = linalg::matmul_tn(f.as_ref(), f.as_ref());
            Mat::from_fn(p, p, |i, j| scale * s[(i, j)])
        }
        None => Mat::from_fn(p, p, |i, j| if i == j { scale } else { 0.0 }),
    }
}

fn realize(source: &DataSource, n: usize, p: usize, seed: u64) -> Result<Realized> {
    match source {
        DataSource::Gaussian { sigma_factor } => Ok(Realized {
            x: generate_gaussian_design(n, p, sigma_factor.as_ref().map(|f| f.as_ref()), seed)?,
            test_points: TestPointPolicy::Covariance(second_moment(sigma_factor.as_ref(), p, 1.0)),
            scale_law: Some(DiscreteDistribution::point_mass(1.0)?),
            scale_note: "",
        }),
        DataSource::Elliptical(spec) => {
            let (x, scales) = generate_elliptical_design(n, p, spec, seed)?;
            let (law, note) = match spec.scale_law() {
                ScaleLaw::Discrete(d) => (d.clone(), ""),
                ScaleLaw::InverseChiSquare(_) => {
                    let w2: Vec<f64> = scales.iter().map(|w| w * w).collect();
                    (DiscreteDistribution::empirical(&w2)?, "scale law discretized from the realized sample")
                }
            };
            let factor = spec.sigma_factor().map(|f| f.to_owned());
            Ok(Realized {
                x,
                test_points: TestPointPolicy::Covariance(second_moment(factor.as_ref(), p, law.mean())),
                scale_law: Some(law),
                scale_note: note,
            })
        }
        DataSource::Csv { path, response } => {
            let (x, _) = load_csv_standardize(path, response)?;
            let gram = linalg::matmul_tn(x.matrix(), x.matrix());
            let nf = x.nrows() as f64;
            let sigma = Mat::from_fn(x.ncols(), x.ncols(), |i, j| gram[(i, j)] / nf);
            Ok(Realized {
                x,
                test_points: TestPointPolicy::Covariance(sigma),
                scale_law: None,
                scale_note: "",
            })
        }
    }
}

/// Prediction for one `(method, r)` cell, with the ratios it was evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodTheory {
    pub report: Option<TheoryReport>,
    pub gamma: f64,
    pub xi: f64,
    pub padded_n: Option<usize>,
    pub note: String,
}

fn join(notes: &[&str]) -> String {
    notes.iter().filter(|s| !s.is_empty()).copied().collect::<Vec<_>>().join("; ")
}

/// Selects the prediction matching `method`.
///
/// `scale_law` is the law of `w²` for sampling methods; `None` means the
/// design has no scale model (real data), in which case leverage-based
/// methods get no theory and uniform sampling is flagged.
pub fn method_theory(
    method: SketchMethod,
    n: usize,
    p: usize,
    r: usize,
    scale_law: Option<&DiscreteDistribution>,
    greedy: GreedyConvention,
) -> MethodTheory {
    let (mut gamma, mut xi) = (p as f64 / n as f64, r as f64 / n as f64);
    let mut padded_n = None;
    if method == SketchMethod::Srht && !n.is_power_of_two() {
        let m = n.next_power_of_two();
        gamma = p as f64 / m as f64;
        xi = r as f64 / m as f64;
        padded_n = Some(m);
    }
    let ratios = AspectRatios::new(gamma, xi);
    let law = scale_law;
    let is_csv = law.is_none();
    let elliptical = law.is_some_and(|l| l.len() > 1 || l.atoms()[0] != 1.0);
    let (report, note): (Option<Result<TheoryReport>>, &str) = match method {
        SketchMethod::Gaussian => (Some(predict_gaussian_finite(n, p, r)), ""),
        SketchMethod::IidRademacher | SketchMethod::IidSparse => (Some(ratios.map(predict_iid)), ""),
        SketchMethod::Haar | SketchMethod::Srht => (Some(ratios.map(predict_orthogonal)), ""),
        SketchMethod::UniformSample => match law {
            Some(l) if elliptical => (
                Some(ratios.and_then(|a| {
                    predict_elliptical_sampling(l, &SamplingRule::Probabilities(vec![a.xi(); l.len()]), a)
                })),
                "",
            ),
            _ if is_csv => (
                Some(ratios.map(predict_orthogonal)),
                "uniform-sampling theory assumes a rotationally invariant design",
            ),
            _ => (Some(ratios.map(predict_orthogonal)), ""),
        },
        SketchMethod::LeverageSample => match law {
            Some(l) => (Some(ratios.and_then(|a| predict_elliptical_sampling(l, &SamplingRule::Leverage, a))), ""),
            None => (None, "no leverage-sampling theory without a scale model"),
        },
        SketchMethod::GreedyLeverage => match law {
            Some(l) => (Some(ratios.and_then(|a| predict_greedy_leverage(l, a, greedy))), ""),
            None => (None, "no greedy-leverage theory without a scale model"),
        },
    };
    let (report, err_note) = match report {
        Some(Ok(r)) => (Some(r), String::new()),
        Some(Err(e)) => (None, format!("theory unavailable: {e}")),
        None => (None, String::new()),
    };
    let pad_note = if padded_n.is_some() { "srht input zero-padded" } else { "" };
    MethodTheory {
        report,
        gamma,
        xi,
        padded_n,
        note: join(&[note, &err_note, pad_note]),
    }
}

/// Runs every `(method, r)` cell of the grid.
///
/// With a fixed design, replicate `k` of every cell uses sketch seed
/// `derive_seed(root, k)`. With `redraw_design`, replicate `k` also draws its
/// own design from `derive_seed(derive_seed(root, DATA), k)`.
pub fn run_grid(grid: &ExperimentGrid) -> Result<Vec<ResultRow>> {
    grid.validate()?;
    let data_seed = derive_seed(grid.root_seed, stream::DATA);
    let is_csv = matches!(grid.data_source, DataSource::Csv { .. });
    let cells: Vec<(SketchMethod, usize)> = grid
        .methods
        .iter()
        .flat_map(|&m| grid.r_values.iter().map(move |&r| (m, r)))
        .collect();

    let with_coords = |m: SketchMethod, r: usize| move |e: Error| -> Error {
        match e {
            Error::RetriesExhausted { attempts, last } => Error::RetriesExhausted {
                attempts,
                last: Box::new(Error::Numerical(format!("method={m}, r={r}: {last}"))),
            },
            other => other,
        }
    };

    let (reference, per_cell): (Realized, Vec<Vec<Replicate>>) = if grid.redraw_design && !is_csv {
        let designs = |k: u64| realize(&grid.data_source, grid.n, grid.p, derive_seed(data_seed, k));
        let per_rep = run_indexed(grid.reps, grid.parallel, |k| {
            let realized = designs(k)?;
            let ctx = EfficiencyContext::new(&realized.x, &realized.test_points)?;
            cells
                .iter()
                .map(|&(m, r)| {
                    replicate(&ctx, m, r, derive_seed(grid.root_seed, k), &grid.options).map_err(with_coords(m, r))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let per_cell = (0..cells.len())
            .map(|c| per_rep.iter().map(|rep| rep[c]).collect())
            .collect();
        (designs(0)?, per_cell)
    } else {
        let realized = realize(&grid.data_source, grid.n, grid.p, data_seed)?;
        grid.check_sizes(realized.x.nrows(), realized.x.ncols())?;
        let ctx = EfficiencyContext::new(&realized.x, &realized.test_points)?;
        let per_cell = cells
            .iter()
            .map(|&(m, r)| {
                run_indexed(grid.reps, grid.parallel, |k| {
                    replicate(&ctx, m, r, derive_seed(grid.root_seed, k), &grid.options)
                })
                .map_err(with_coords(m, r))
            })
            .collect::<Result<Vec<_>>>()?;
        (realized, per_cell)
    };

    let (n, p) = (reference.x.nrows(), reference.x.ncols());
    let mut rows = Vec::with_capacity(cells.len() * grid.metrics.len());
    for (&(method, r), reps) in cells.iter().zip(&per_cell) {
        let summary = summarize_replicates(reps, grid.root_seed)?;
        let mut theory = method_theory(method, n, p, r, reference.scale_law.as_ref(), grid.greedy);
        if !reference.scale_note.is_empty() && method.is_sampling() {
            theory.note = join(&[&theory.note, reference.scale_note]);
        }
        for &metric in &grid.metrics {
            let s = summary.get(metric);
            rows.push(ResultRow {
                method,
                n,
                p,
                r,
                gamma: theory.gamma,
                xi: theory.xi,
                metric,
                empirical_mean: s.mean,
                empirical_sd: s.sd,
                empirical_q05: s.q05,
                empirical_q95: s.q95,
                theory_value: theory.report.map(|t| t.get(metric)),
                replicates: summary.replicates,
                padded_n: theory.padded_n,
                mean_rows: summary.mean_rows,
                retries: summary.retries,
                note: theory.note.clone(),
            });
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// Canonical order: method, then r, then metric.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by_key(|r| (r.method, r.r, r.metric));
}

/// Sketch-and-solve on a real dataset: RE and OE (test points drawn from
/// the in-sample covariance), with the fixed-design theory alongside.
pub fn run_empirical(
    path: impl Into<PathBuf>,
    response: &str,
    methods: &[SketchMethod],
    r_values: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<ResultRow>> {
    let mut grid = ExperimentGrid::new(0, 0, r_values.to_vec(), methods.to_vec());
    grid.data_source = DataSource::Csv {
        path: path.into(),
        response: response.to_string(),
    };
    grid.metrics = vec![Metric::Re, Metric::Oe];
    grid.reps = reps;
    grid.root_seed = seed;
    run_grid(&grid)
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(RESULT_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

pub const RESULT_COLUMNS: [&str; 17] = [
    "method",
    "n",
    "p",
    "r",
    "gamma",
    "xi",
    "metric",
    "empirical_mean",
    "empirical_sd",
    "empirical_q05",
    "empirical_q95",
    "theory_value",
    "replicates",
    "padded_n",
    "mean_rows",
    "retries",
    "note",
];

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Groups rows by method, keeping the canonical order inside each group.
pub fn by_method(rows: &[ResultRow]) -> BTreeMap<SketchMethod, Vec<&ResultRow>> {
    let mut out: BTreeMap<SketchMethod, Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        out.entry(row.method).or_default().push(row);
    }
    out
}
