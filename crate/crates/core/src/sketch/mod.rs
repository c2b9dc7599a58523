//! Sketching operators.
//!
//! Eight constructions are supported: dense Gaussian and iid (Rademacher or
//! sparse ±1) projections, Haar partial orthogonal projections, the
//! subsampled randomized Hadamard transform, and three row-sampling schemes
//! (uniform Bernoulli, randomized leverage, greedy leverage).
//!
//! Iid operators are deliberately left unnormalized: every efficiency ratio
//! is invariant under `S → cS`.

mod fwht;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use faer::{Mat, MatRef};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::regression::{leverage_scores, DesignMatrix};
use crate::rng::{self, derive_seed};

pub use fwht::{fwht, fwht_in_place};

/// Attempts made for a sketch draw before a retryable failure is reported.
pub const MAX_DRAW_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchMethod {
    Gaussian,
    IidRademacher,
    IidSparse,
    Haar,
    Srht,
    UniformSample,
    LeverageSample,
    GreedyLeverage,
}

impl SketchMethod {
    pub const ALL: [SketchMethod; 8] = [
        Self::Gaussian,
        Self::IidRademacher,
        Self::IidSparse,
        Self::Haar,
        Self::Srht,
        Self::UniformSample,
        Self::LeverageSample,
        Self::GreedyLeverage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::IidRademacher => "iid_rademacher",
            Self::IidSparse => "iid_sparse",
            Self::Haar => "haar",
            Self::Srht => "srht",
            Self::UniformSample => "uniform",
            Self::LeverageSample => "leverage",
            Self::GreedyLeverage => "greedy_leverage",
        }
    }

    pub fn is_sampling(self) -> bool {
        matches!(
            self,
            Self::UniformSample | Self::LeverageSample | Self::GreedyLeverage
        )
    }

    /// Whether the operator needs the design itself (leverage-based methods).
    pub fn needs_design(self) -> bool {
        matches!(self, Self::LeverageSample | Self::GreedyLeverage)
    }
}

impl fmt::Display for SketchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SketchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" => Self::Gaussian,
            "iid" | "iid_rademacher" | "rademacher" => Self::IidRademacher,
            "iid_sparse" | "sparse" => Self::IidSparse,
            "haar" | "orthogonal" => Self::Haar,
            "srht" | "hadamard" => Self::Srht,
            "uniform" | "uniform_sample" | "sampling" => Self::UniformSample,
            "leverage" | "leverage_sample" => Self::LeverageSample,
            "greedy" | "greedy_leverage" => Self::GreedyLeverage,
            other => return Err(Error::invalid(format!("unknown sketch method `{other}`"))),
        })
    }
}

/// Entry law of an iid sketch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IidLaw {
    Rademacher,
    /// Entries `+1, 0, -1` with probabilities `q/2, 1-q, q/2`.
    Sparse(f64),
}

/// How the SRHT chooses its rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SrhtRowSampling {
    /// Each row independently with probability `r/m`.
    #[default]
    Bernoulli,
    /// Exactly `r` rows uniformly without replacement.
    ExactR,
}

/// Knobs that are not part of the `(method, n, r, seed)` signature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchOptions {
    pub sparse_density: f64,
    pub srht_rows: SrhtRowSampling,
}

impl Default for SketchOptions {
    fn default() -> Self {
        Self {
            sparse_density: 0.1,
            srht_rows: SrhtRowSampling::Bernoulli,
        }
    }
}

#[derive(Debug, Clone)]
struct SrhtPipeline {
    padded: usize,
    /// `(P x)_i = x_{perm[i]}`.
    perm: Vec<usize>,
    signs: Vec<f64>,
    rows: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Repr {
    Dense(Mat<f64>),
    Rows(Vec<usize>),
    Srht(SrhtPipeline),
}

/// Structure of `SᵀS`, which decides the efficiency formula to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramStructure {
    /// Rows are orthonormal: `SSᵀ = I`.
    Orthonormal,
    /// Row selector: `SᵀS` is a 0/1 diagonal.
    Selection,
    General,
}

/// A realized sketch `S` of size `r̃ × n`.
#[derive(Debug, Clone)]
pub struct SketchOperator {
    method: SketchMethod,
    input_dim: usize,
    repr: Repr,
}

impl SketchOperator {
    /// Wraps an explicit `r̃ × n` matrix.
    pub fn from_dense(method: SketchMethod, matrix: Mat<f64>) -> Result<Self> {
        if matrix.nrows() == 0 {
            return Err(Error::invalid("sketch must have at least one row"));
        }
        Ok(Self {
            method,
            input_dim: matrix.ncols(),
            repr: Repr::Dense(matrix),
        })
    }

    /// Row selector keeping the given (sorted, distinct) indices.
    pub fn from_rows(method: SketchMethod, n: usize, mut rows: Vec<usize>) -> Result<Self> {
        rows.sort_unstable();
        rows.dedup();
        if rows.last().is_some_and(|&i| i >= n) {
            return Err(Error::invalid("row index out of range"));
        }
        Ok(Self {
            method,
            input_dim: n,
            repr: Repr::Rows(rows),
        })
    }

    /// Keeps every row.
    pub fn identity(n: usize) -> Self {
        Self {
            method: SketchMethod::UniformSample,
            input_dim: n,
            repr: Repr::Rows((0..n).collect()),
        }
    }

    pub fn method(&self) -> SketchMethod {
        self.method
    }

    /// Column dimension `n` of the operator.
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Working dimension: the padded power of two for the SRHT, `n` otherwise.
    pub fn padded_dim(&self) -> usize {
        match &self.repr {
            Repr::Srht(s) => s.padded,
            _ => self.input_dim,
        }
    }

    /// Realized row count `r̃`.
    pub fn realized_rows(&self) -> usize {
        match &self.repr {
            Repr::Dense(m) => m.nrows(),
            Repr::Rows(r) => r.len(),
            Repr::Srht(s) => s.rows.len(),
        }
    }

    /// Kept row indices for sampling operators.
    pub fn kept_rows(&self) -> Option<&[usize]> {
        match &self.repr {
            Repr::Rows(r) => Some(r),
            _ => None,
        }
    }

    pub fn gram_structure(&self) -> GramStructure {
        match &self.repr {
            Repr::Rows(_) => GramStructure::Selection,
            Repr::Srht(s) if s.padded == self.input_dim => GramStructure::Orthonormal,
            Repr::Dense(_) if self.method == SketchMethod::Haar => GramStructure::Orthonormal,
            _ => GramStructure::General,
        }
    }

    fn check_rows(&self, x: MatRef<'_, f64>) -> Result<()> {
        if x.nrows() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "operator expects {} rows, got {}",
                self.input_dim,
                x.nrows()
            )));
        }
        Ok(())
    }

    /// `S x` for an `n × k` block.
    pub fn apply(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.check_rows(x)?;
        Ok(match &self.repr {
            Repr::Dense(s) => linalg::matmul(s.as_ref(), x),
            Repr::Rows(rows) => Mat::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)]),
            Repr::Srht(s) => s.apply(x, self.input_dim),
        })
    }

    /// `Sᵀ b` for an `r̃ × k` block.
    pub fn apply_transpose(&self, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if b.nrows() != self.realized_rows() {
            return Err(Error::DimensionMismatch(format!(
                "operator has {} rows, block has {}",
                self.realized_rows(),
                b.nrows()
            )));
        }
        Ok(match &self.repr {
            Repr::Dense(s) => linalg::matmul_tn(s.as_ref(), b),
            Repr::Rows(rows) => {
                let mut out = Mat::<f64>::zeros(self.input_dim, b.ncols());
                for j in 0..b.ncols() {
                    for (k, &i) in rows.iter().enumerate() {
                        out[(i, j)] = b[(k, j)];
                    }
                }
                out
            }
            Repr::Srht(s) => s.apply_transpose(b, self.input_dim),
        })
    }

    /// Explicit `r̃ × n` matrix.
    pub fn materialize(&self) -> Mat<f64> {
        match &self.repr {
            Repr::Dense(s) => s.clone(),
            _ => self
                .apply(Mat::<f64>::identity(self.input_dim, self.input_dim).as_ref())
                .expect("identity has matching rows"),
        }
    }

    /// Explicit `r̃ × m` matrix acting on the zero-padded input. Equal to
    /// [`materialize`](Self::materialize) unless the SRHT padded its input.
    pub fn materialize_padded(&self) -> Mat<f64> {
        match &self.repr {
            Repr::Srht(s) => s.apply(Mat::<f64>::identity(s.padded, s.padded).as_ref(), s.padded),
            _ => self.materialize(),
        }
    }

    /// Dense row-major CSV dump of the `r̃ × n` matrix.
    pub fn write_dense_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let m = self.materialize();
        for i in 0..m.nrows() {
            let line: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

impl SrhtPipeline {
    /// `B H D P` applied to `x` (with `n ≤ padded` rows; missing rows are zero).
    fn apply(&self, x: MatRef<'_, f64>, n: usize) -> Mat<f64> {
        let m = self.padded;
        let mut out = Mat::<f64>::zeros(self.rows.len(), x.ncols());
        let mut buf = vec![0.0; m];
        for j in 0..x.ncols() {
            for (i, slot) in buf.iter_mut().enumerate() {
                let src = self.perm[i];
                *slot = if src < n { self.signs[i] * x[(src, j)] } else { 0.0 };
            }
            fwht_in_place(&mut buf).expect("padded length is a power of two");
            for (k, &row) in self.rows.iter().enumerate() {
                out[(k, j)] = buf[row];
            }
        }
        out
    }

    /// `Pᵀ D H Bᵀ b`, truncated to the first `n` coordinates.
    fn apply_transpose(&self, b: MatRef<'_, f64>, n: usize) -> Mat<f64> {
        let m = self.padded;
        let mut out = Mat::<f64>::zeros(n, b.ncols());
        let mut buf = vec![0.0; m];
        for j in 0..b.ncols() {
            buf.iter_mut().for_each(|v| *v = 0.0);
            for (k, &row) in self.rows.iter().enumerate() {
                buf[row] = b[(k, j)];
            }
            fwht_in_place(&mut buf).expect("padded length is a power of two");
            for (i, &v) in buf.iter().enumerate() {
                let dst = self.perm[i];
                if dst < n {
                    out[(dst, j)] = self.signs[i] * v;
                }
            }
        }
        out
    }
}

fn check_size(n: usize, r: usize) -> Result<()> {
    if r == 0 || r > n {
        return Err(Error::invalid(format!("sketch size must satisfy 1 <= r <= n, got r={r}, n={n}")));
    }
    Ok(())
}

/// Dense `r × n` matrix of iid standard normals.
pub fn gaussian_sketch(n: usize, r: usize, seed: u64) -> Result<SketchOperator> {
    check_size(n, r)?;
    let mut rng = rng::seeded(seed);
    SketchOperator::from_dense(SketchMethod::Gaussian, rng::standard_normal_matrix(&mut rng, r, n))
}

/// Dense `r × n` matrix of iid Rademacher or sparse ±1 entries.
pub fn iid_sketch(n: usize, r: usize, law: IidLaw, seed: u64) -> Result<SketchOperator> {
    check_size(n, r)?;
    let mut rng = rng::seeded(seed);
    let (method, mat) = match law {
        IidLaw::Rademacher => (
            SketchMethod::IidRademacher,
            Mat::from_fn(r, n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 }),
        ),
        IidLaw::Sparse(q) => {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::invalid(format!("sparse density {q} must lie in (0, 1]")));
            }
            (
                SketchMethod::IidSparse,
                Mat::from_fn(r, n, |_, _| {
                    let u: f64 = rng.random();
                    if u < q / 2.0 {
                        1.0
                    } else if u < q {
                        -1.0
                    } else {
                        0.0
                    }
                }),
            )
        }
    };
    SketchOperator::from_dense(method, mat)
}

/// Haar-distributed `r × n` partial orthogonal matrix: the thin orthogonal
/// factor of an `n × r` Gaussian matrix, with column signs fixed so the
/// triangular factor has a positive diagonal, transposed.
pub fn haar_sketch(n: usize, r: usize, seed: u64) -> Result<SketchOperator> {
    check_size(n, r)?;
    let mut rng = rng::seeded(seed);
    let g = rng::standard_normal_matrix(&mut rng, n, r);
    let qr = linalg::thin_qr(g.as_ref());
    let signs: Vec<f64> = (0..r)
        .map(|k| if qr.r[(k, k)] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let s = Mat::from_fn(r, n, |i, j| qr.q[(j, i)] * signs[i]);
    SketchOperator::from_dense(SketchMethod::Haar, s)
}

/// Subsampled randomized Hadamard transform `S = B H D P`.
///
/// Inputs of non-power-of-two length are zero-padded to `m`, the next power
/// of two; row selection then uses probability `r/m`. Unselected rows are
/// discarded, so the realized operator has `r̃ ≈ r` orthonormal rows.
pub fn srht_sketch(n: usize, r: usize, seed: u64, rows: SrhtRowSampling) -> Result<SketchOperator> {
    check_size(n, r)?;
    let m = n.next_power_of_two();
    let mut rng = rng::seeded(seed);
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut rng);
    let signs: Vec<f64> = (0..m)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let selected: Vec<usize> = match rows {
        SrhtRowSampling::Bernoulli => {
            let prob = r as f64 / m as f64;
            (0..m).filter(|_| rng.random::<f64>() < prob).collect()
        }
        SrhtRowSampling::ExactR => {
            let mut v = index::sample(&mut rng, m, r).into_vec();
            v.sort_unstable();
            v
        }
    };
    if selected.is_empty() {
        return Err(Error::TooFewRows { kept: 0, p: 1 });
    }
    Ok(SketchOperator {
        method: SketchMethod::Srht,
        input_dim: n,
        repr: Repr::Srht(SrhtPipeline {
            padded: m,
            perm,
            signs,
            rows: selected,
        }),
    })
}

/// Keeps each row independently with probability `r/n`.
pub fn uniform_sample_sketch(n: usize, r: usize, seed: u64) -> Result<SketchOperator> {
    check_size(n, r)?;
    let mut rng = rng::seeded(seed);
    let prob = r as f64 / n as f64;
    let rows: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < prob).collect();
    SketchOperator::from_rows(SketchMethod::UniformSample, n, rows)
}

/// Keeps row `i` independently with probability `min((r/p) h_i, 1)`.
pub fn leverage_sample_sketch(x: &DesignMatrix, r: usize, seed: u64) -> Result<SketchOperator> {
    let (n, p) = (x.nrows(), x.ncols());
    if r <= p || r > n {
        return Err(Error::invalid(format!("leverage sampling needs p < r <= n, got r={r}")));
    }
    let h = leverage_scores(x);
    leverage_sample_from_scores(&h, p, r, seed)
}

/// Leverage sampling from precomputed scores.
pub fn leverage_sample_from_scores(h: &[f64], p: usize, r: usize, seed: u64) -> Result<SketchOperator> {
    let mut rng = rng::seeded(seed);
    let ratio = r as f64 / p as f64;
    let rows: Vec<usize> = h
        .iter()
        .enumerate()
        .filter(|(_, &hi)| rng.random::<f64>() < (ratio * hi).min(1.0))
        .map(|(i, _)| i)
        .collect();
    SketchOperator::from_rows(SketchMethod::LeverageSample, h.len(), rows)
}

/// Indices of the `r` largest scores, ties broken by smaller index, returned
/// in ascending index order.
pub fn greedy_selection(h: &[f64], r: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..h.len()).collect();
    order.sort_by(|&a, &b| h[b].total_cmp(&h[a]).then(a.cmp(&b)));
    order.truncate(r);
    order.sort_unstable();
    order
}

/// Deterministically keeps the `r` rows with the largest leverage scores.
pub fn greedy_leverage_sketch(x: &DesignMatrix, r: usize) -> Result<SketchOperator> {
    let (n, p) = (x.nrows(), x.ncols());
    if r <= p || r > n {
        return Err(Error::invalid(format!("greedy leverage needs p < r <= n, got r={r}")));
    }
    let h = leverage_scores(x);
    SketchOperator::from_rows(SketchMethod::GreedyLeverage, n, greedy_selection(&h, r))
}

/// Dispatches on `method`. Leverage-based methods read `x`; all others only
/// use its row count.
pub fn draw_sketch(
    method: SketchMethod,
    x: &DesignMatrix,
    r: usize,
    seed: u64,
    options: &SketchOptions,
) -> Result<SketchOperator> {
    let n = x.nrows();
    match method {
        SketchMethod::Gaussian => gaussian_sketch(n, r, seed),
        SketchMethod::IidRademacher => iid_sketch(n, r, IidLaw::Rademacher, seed),
        SketchMethod::IidSparse => iid_sketch(n, r, IidLaw::Sparse(options.sparse_density), seed),
        SketchMethod::Haar => haar_sketch(n, r, seed),
        SketchMethod::Srht => srht_sketch(n, r, seed, options.srht_rows),
        SketchMethod::UniformSample => uniform_sample_sketch(n, r, seed),
        SketchMethod::LeverageSample => leverage_sample_sketch(x, r, seed),
        SketchMethod::GreedyLeverage => greedy_leverage_sketch(x, r),
    }
}

/// Runs `attempt` with `seed`, then with `derive_seed(seed, k)` for
/// `k = 1, 2, …` while it fails with a retryable error. Returns the value and
/// the number of failed attempts.
pub fn with_retries<T>(seed: u64, mut attempt: impl FnMut(u64) -> Result<T>) -> Result<(T, usize)> {
    let mut last = None;
    for k in 0..MAX_DRAW_ATTEMPTS {
        let s = if k == 0 { seed } else { derive_seed(seed, k as u64) };
        match attempt(s) {
            Ok(v) => return Ok((v, k)),
            Err(e) if e.is_retryable() => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::RetriesExhausted {
        attempts: MAX_DRAW_ATTEMPTS,
        last: Box::new(last.expect("at least one attempt")),
    })
}

/// Sketched data `(SX, SY)`.
#[derive(Debug, Clone)]
pub struct SketchedProblem<'a> {
    pub sx: Mat<f64>,
    pub sy: Vec<f64>,
    pub n: usize,
    pub p: usize,
    pub operator: &'a SketchOperator,
}

impl SketchedProblem<'_> {
    /// OLS on the sketched data.
    pub fn solve(&self) -> Result<Vec<f64>> {
        crate::regression::lstsq(self.sx.as_ref(), &self.sy)
    }
}

/// Forms `(SX, SY)` and checks that `SX` keeps full column rank.
pub fn apply_sketch<'a>(
    op: &'a SketchOperator,
    x: &DesignMatrix,
    y: &[f64],
) -> Result<SketchedProblem<'a>> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("response has length {}, expected {n}", y.len())));
    }
    let kept = op.realized_rows();
    if kept < p {
        return Err(Error::TooFewRows { kept, p });
    }
    let sx = op.apply(x.matrix())?;
    let r = linalg::qr_r(sx.as_ref());
    linalg::guarded_inverse(r.as_ref(), kept, f64::INFINITY)?;
    let sy = linalg::column_to_vec(op.apply(linalg::column(y).as_ref())?.as_ref());
    Ok(SketchedProblem {
        sx,
        sy,
        n,
        p,
        operator: op,
    })
}
