//! Data model, OLS, leverage scores, synthetic generators and CSV ingestion.

use std::path::Path;

use faer::{Mat, MatRef};
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{self, stream};

/// An `n × p` design with `n > p ≥ 1` and full column rank.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    data: Mat<f64>,
}

impl DesignMatrix {
    pub fn new(data: Mat<f64>) -> Result<Self> {
        let (n, p) = (data.nrows(), data.ncols());
        if p == 0 || n <= p {
            return Err(Error::invalid(format!("design must satisfy n > p >= 1, got {n}x{p}")));
        }
        let finite = (0..p).all(|j| (0..n).all(|i| data[(i, j)].is_finite()));
        if !finite {
            return Err(Error::invalid("design contains non-finite entries"));
        }
        let r = linalg::qr_r(data.as_ref());
        linalg::guarded_inverse(r.as_ref(), n, f64::INFINITY)?;
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(linalg::from_rows(rows)?)
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.data.as_ref()
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.data
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    /// Aspect ratio `p / n`.
    pub fn gamma(&self) -> f64 {
        self.ncols() as f64 / self.nrows() as f64
    }
}

/// True coefficients and noise level of the linear model `Y = Xβ + ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub beta: Vec<f64>,
    pub sigma: f64,
}

impl GroundTruth {
    pub fn new(beta: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("noise level {sigma} must be finite and >= 0")));
        }
        Ok(Self { beta, sigma })
    }
}

/// How a chi-square(1) draw `c` becomes a row scale in the heavy-tailed
/// generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ScaleConvention {
    /// `w = 1/√c`: rows are multivariate t with one degree of freedom.
    #[default]
    SquareRoot,
    /// `w = 1/c`.
    Raw,
}

impl std::fmt::Display for ScaleConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SquareRoot => "sqrt",
            Self::Raw => "raw",
        })
    }
}

impl std::str::FromStr for ScaleConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" | "square-root" | "square_root" => Ok(Self::SquareRoot),
            "raw" | "chi-square" => Ok(Self::Raw),
            other => Err(Error::invalid(format!("unknown scale convention `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScaleLaw {
    /// Law of `w²` on finitely many positive atoms.
    Discrete(DiscreteDistribution),
    /// Inverse chi-square(1) scales.
    InverseChiSquare(ScaleConvention),
}

/// Elliptical rows `x_i = w_i Σ^{1/2} z_i`.
#[derive(Debug, Clone)]
pub struct EllipticalSpec {
    scale_law: ScaleLaw,
    sigma_factor: Option<Mat<f64>>,
}

impl EllipticalSpec {
    /// `sigma_factor` is `Σ^{1/2}`; `None` means the identity.
    pub fn new(scale_law: ScaleLaw, sigma_factor: Option<Mat<f64>>) -> Result<Self> {
        if let ScaleLaw::Discrete(d) = &scale_law {
            if d.atoms().iter().any(|&a| !(a > 0.0)) {
                return Err(Error::invalid("scale atoms must be strictly positive"));
            }
        }
        if let Some(f) = &sigma_factor {
            if !linalg::is_positive_definite(f.as_ref()) {
                return Err(Error::invalid("sigma factor must be symmetric positive definite"));
            }
        }
        Ok(Self {
            scale_law,
            sigma_factor,
        })
    }

    /// Heavy-tailed rows: `N(0, Σ)` with `Σ_ij = 2·2^{-|i-j|}` divided by a
    /// chi-square(1) scale.
    pub fn heavy_tailed(p: usize, convention: ScaleConvention) -> Result<Self> {
        let sigma = Mat::from_fn(p, p, |i, j| 2.0 * 2f64.powi(-(i.abs_diff(j) as i32)));
        let factor = linalg::spd_sqrt(sigma.as_ref())?;
        Self::new(ScaleLaw::InverseChiSquare(convention), Some(factor))
    }

    pub fn scale_law(&self) -> &ScaleLaw {
        &self.scale_law
    }

    pub fn sigma_factor(&self) -> Option<MatRef<'_, f64>> {
        self.sigma_factor.as_ref().map(|m| m.as_ref())
    }
}

/// Where out-of-sample error is evaluated.
#[derive(Debug, Clone)]
pub enum TestPointPolicy {
    /// A single explicit test vector `x_t`.
    Point(Vec<f64>),
    /// A test-point population with second moment `E[x_t x_tᵀ] = Σ`;
    /// quadratic forms are evaluated through `E[x_tᵀ A x_t] = tr(AΣ)`.
    Covariance(Mat<f64>),
}

impl TestPointPolicy {
    pub fn identity(p: usize) -> Self {
        Self::Covariance(Mat::identity(p, p))
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            Self::Point(x) if x.len() != p => Err(Error::DimensionMismatch(format!(
                "test point has length {}, expected {p}",
                x.len()
            ))),
            Self::Covariance(s) if s.nrows() != p || s.ncols() != p => Err(
                Error::DimensionMismatch(format!("test covariance must be {p}x{p}")),
            ),
            Self::Covariance(s) if !linalg::is_positive_semidefinite(s.as_ref()) => Err(
                Error::invalid("test covariance must be positive semidefinite"),
            ),
            _ => Ok(()),
        }
    }
}

/// Least-squares coefficients of `y` on the columns of `a`, through a thin
/// QR factorization. Fails when `a` is numerically rank deficient.
pub fn lstsq(a: MatRef<'_, f64>, y: &[f64]) -> Result<Vec<f64>> {
    if a.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows but response of length {}",
            a.nrows(),
            y.len()
        )));
    }
    let qr = linalg::thin_qr(a);
    linalg::guarded_inverse(qr.r.as_ref(), a.nrows(), f64::INFINITY)?;
    let mut rhs = linalg::matmul_tn(qr.q.as_ref(), linalg::column(y).as_ref());
    linalg::solve_upper_in_place(qr.r.as_ref(), &mut rhs);
    Ok(linalg::column_to_vec(rhs.as_ref()))
}

pub fn ols_fit(x: &DesignMatrix, y: &[f64]) -> Result<Vec<f64>> {
    lstsq(x.matrix(), y)
}

/// Diagonal of the hat matrix: squared row norms of the thin orthogonal
/// factor of `X`.
pub fn leverage_scores(x: &DesignMatrix) -> Vec<f64> {
    let q = linalg::thin_qr(x.matrix()).q;
    (0..q.nrows())
        .map(|i| (0..q.ncols()).map(|j| q[(i, j)] * q[(i, j)]).sum())
        .collect()
}

fn validate_factor(factor: Option<MatRef<'_, f64>>, p: usize) -> Result<()> {
    if let Some(f) = factor {
        if f.nrows() != p || f.ncols() != p {
            return Err(Error::DimensionMismatch(format!("sigma factor must be {p}x{p}")));
        }
    }
    Ok(())
}

fn correlated_normals(n: usize, p: usize, factor: Option<MatRef<'_, f64>>, seed: u64) -> Mat<f64> {
    let mut rng = rng::seeded(seed);
    let z = rng::standard_normal_matrix(&mut rng, n, p);
    match factor {
        Some(f) => linalg::matmul(z.as_ref(), f),
        None => z,
    }
}

/// Rows `Σ^{1/2} z_i` with `z_i` iid standard normal, i.e. `X = Z Σ^{1/2}`.
pub fn generate_gaussian_design(
    n: usize,
    p: usize,
    sigma_factor: Option<MatRef<'_, f64>>,
    seed: u64,
) -> Result<DesignMatrix> {
    if p == 0 || n <= p {
        return Err(Error::invalid(format!("need n > p >= 1, got n={n}, p={p}")));
    }
    validate_factor(sigma_factor, p)?;
    DesignMatrix::new(correlated_normals(n, p, sigma_factor, seed))
}

/// Elliptical design. Returns the realized scales `w_i` alongside `X`.
///
/// The normal part consumes the same stream as [`generate_gaussian_design`];
/// scales come from a derived stream, so a point mass at one reproduces the
/// Gaussian design bit for bit.
pub fn generate_elliptical_design(
    n: usize,
    p: usize,
    spec: &EllipticalSpec,
    seed: u64,
) -> Result<(DesignMatrix, Vec<f64>)> {
    if p == 0 || n <= p {
        return Err(Error::invalid(format!("need n > p >= 1, got n={n}, p={p}")));
    }
    validate_factor(spec.sigma_factor(), p)?;
    let mut x = correlated_normals(n, p, spec.sigma_factor(), seed);
    let mut rng = rng::seeded(rng::derive_seed(seed, stream::SCALES));
    let scales: Vec<f64> = match &spec.scale_law {
        ScaleLaw::Discrete(law) => (0..n).map(|_| law.sample(&mut rng).sqrt()).collect(),
        ScaleLaw::InverseChiSquare(conv) => {
            let chi = ChiSquared::new(1.0).expect("valid degrees of freedom");
            (0..n)
                .map(|_| {
                    let c: f64 = chi.sample(&mut rng);
                    match conv {
                        ScaleConvention::SquareRoot => 1.0 / c.sqrt(),
                        ScaleConvention::Raw => 1.0 / c,
                    }
                })
                .collect()
        }
    };
    for j in 0..p {
        for (i, &w) in scales.iter().enumerate() {
            x[(i, j)] *= w;
        }
    }
    Ok((DesignMatrix::new(x)?, scales))
}

/// `Y = Xβ + σ ε` with `ε` iid standard normal.
pub fn simulate_response(x: &DesignMatrix, truth: &GroundTruth, seed: u64) -> Result<Vec<f64>> {
    if truth.beta.len() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "beta has length {}, design has {} columns",
            truth.beta.len(),
            x.ncols()
        )));
    }
    let mean = linalg::matmul(x.matrix(), linalg::column(&truth.beta).as_ref());
    let mut rng = rng::seeded(seed);
    let noise = rng::standard_normal_vec(&mut rng, x.nrows());
    Ok((0..x.nrows())
        .map(|i| mean[(i, 0)] + truth.sigma * noise[i])
        .collect())
}

/// Centers every column and scales it to unit standard deviation (divisor
/// `n`). `names` label columns in the constant-column error.
pub fn standardize_columns(m: &mut Mat<f64>, names: &[String]) -> Result<()> {
    let n = m.nrows() as f64;
    for j in 0..m.ncols() {
        let mean = (0..m.nrows()).map(|i| m[(i, j)]).sum::<f64>() / n;
        let var = (0..m.nrows()).map(|i| (m[(i, j)] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        let scale = mean.abs().max(1.0);
        if !(sd > 1e-12 * scale) {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("#{j}"));
            return Err(Error::ConstantColumn(name));
        }
        for i in 0..m.nrows() {
            m[(i, j)] = (m[(i, j)] - mean) / sd;
        }
    }
    Ok(())
}

fn parse_cell(field: &str, row: usize, column: usize) -> Result<f64> {
    let t = field.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        return Err(Error::MissingValue { row, column });
    }
    t.parse::<f64>().map_err(|e| Error::Parse {
        row,
        column,
        message: format!("`{t}`: {e}"),
    })
}

/// Reads a numeric CSV with a header row and standardizes predictors and
/// response. Rows and columns in errors are 1-based, counting the header as
/// row 1.
pub fn load_csv_standardize(
    path: impl AsRef<Path>,
    response_column: &str,
) -> Result<(DesignMatrix, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let response_idx = headers
        .iter()
        .position(|h| h == response_column)
        .or_else(|| response_column.parse::<usize>().ok().filter(|&i| i < headers.len()))
        .ok_or_else(|| Error::invalid(format!("response column `{response_column}` not found")))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let row = k + 2;
        let values = record
            .iter()
            .enumerate()
            .map(|(c, field)| parse_cell(field, row, c + 1))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::invalid("csv has no data rows"));
    }
    let all = linalg::from_rows(&rows)?;
    let mut y = Mat::from_fn(all.nrows(), 1, |i, _| all[(i, response_idx)]);
    standardize_columns(&mut y, &[headers[response_idx].clone()])?;

    let predictor_idx: Vec<usize> = (0..headers.len()).filter(|&c| c != response_idx).collect();
    let names: Vec<String> = predictor_idx.iter().map(|&c| headers[c].clone()).collect();
    let mut x = Mat::from_fn(all.nrows(), predictor_idx.len(), |i, j| all[(i, predictor_idx[j])]);
    standardize_columns(&mut x, &names)?;
    Ok((DesignMatrix::new(x)?, linalg::column_to_vec(y.as_ref())))
}
