//! Thin wrappers over faer used throughout the crate.
//!
//! All dense kernels run with sequential parallelism so that results are
//! bit-identical regardless of thread count; replicate-level parallelism is
//! handled by the Monte-Carlo harness instead.

use std::sync::Once;

use faer::linalg::triangular_solve;
use faer::{Mat, MatRef, Par};

use crate::error::{Error, Result};

static INIT: Once = Once::new();

pub(crate) fn init() {
    INIT.call_once(|| faer::set_global_parallelism(Par::Seq));
}

/// Condition number above which a sketched design is rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

pub fn matmul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    init();
    a * b
}

/// `aᵀ b` without materializing the transpose.
pub fn matmul_tn(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    init();
    a.transpose() * b
}

pub struct ThinQr {
    pub q: Mat<f64>,
    pub r: Mat<f64>,
}

pub fn thin_qr(a: MatRef<'_, f64>) -> ThinQr {
    init();
    let qr = a.qr();
    ThinQr {
        q: qr.compute_thin_Q(),
        r: qr.thin_R().to_owned(),
    }
}

/// Triangular factor only.
pub fn qr_r(a: MatRef<'_, f64>) -> Mat<f64> {
    init();
    a.qr().thin_R().to_owned()
}

/// Singular values in non-increasing order.
pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    init();
    a.singular_values()
        .map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))
}

/// Rank check: the smallest singular value must exceed `σ_max · rows · ε`.
pub fn check_full_rank(sv: &[f64], rows: usize) -> Result<()> {
    let largest = sv.first().copied().unwrap_or(0.0);
    let smallest = sv.last().copied().unwrap_or(0.0);
    let tolerance = largest * rows as f64 * f64::EPSILON;
    if !(smallest > tolerance) {
        return Err(Error::RankDeficient {
            smallest,
            tolerance,
        });
    }
    Ok(())
}

pub fn condition_number(sv: &[f64]) -> f64 {
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Rank and conditioning guard for the triangular factor `r` of a matrix
/// with `rows` rows. Returns `R⁻¹` on success.
///
/// `κ_F = ‖R‖_F ‖R⁻¹‖_F` bounds the spectral condition number from above,
/// so when it is comfortably small no factorization beyond the inverse is
/// needed. Otherwise the singular values decide exactly.
pub fn guarded_inverse(r: MatRef<'_, f64>, rows: usize, condition_limit: f64) -> Result<Mat<f64>> {
    let inv = upper_inverse(r);
    let kappa_f = (frobenius_sq(r) * frobenius_sq(inv.as_ref())).sqrt();
    let rank_limit = 1.0 / (rows as f64 * f64::EPSILON);
    if kappa_f.is_finite() && kappa_f < condition_limit.min(rank_limit) {
        return Ok(inv);
    }
    let sv = singular_values(r)?;
    check_full_rank(&sv, rows)?;
    let cond = condition_number(&sv);
    if cond > condition_limit {
        return Err(Error::IllConditioned(cond));
    }
    Ok(inv)
}

/// Solves `R x = b` for upper-triangular `R`, overwriting `b`.
pub fn solve_upper_in_place(r: MatRef<'_, f64>, b: &mut Mat<f64>) {
    init();
    triangular_solve::solve_upper_triangular_in_place(r, b.as_mut(), Par::Seq);
}

/// Solves `Rᵀ x = b` for upper-triangular `R`, overwriting `b`.
pub fn solve_upper_transpose_in_place(r: MatRef<'_, f64>, b: &mut Mat<f64>) {
    init();
    triangular_solve::solve_lower_triangular_in_place(r.transpose(), b.as_mut(), Par::Seq);
}

/// Inverse of an upper-triangular matrix.
pub fn upper_inverse(r: MatRef<'_, f64>) -> Mat<f64> {
    let mut inv = Mat::<f64>::identity(r.nrows(), r.ncols());
    solve_upper_in_place(r, &mut inv);
    inv
}

pub fn trace(a: MatRef<'_, f64>) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `tr(A B)` for square matrices of equal size, without forming the product.
pub fn trace_of_product(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn frobenius_sq(a: MatRef<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * a[(i, j)];
        }
    }
    acc
}

/// `xᵀ A x`.
pub fn quadratic_form(a: MatRef<'_, f64>, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        let mut col = 0.0;
        for i in 0..a.nrows() {
            col += a[(i, j)] * x[i];
        }
        acc += col * x[j];
    }
    acc
}

pub fn max_abs(a: MatRef<'_, f64>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

pub fn is_symmetric(a: MatRef<'_, f64>, tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = max_abs(a).max(1.0);
    for j in 0..a.ncols() {
        for i in 0..j {
            if (a[(i, j)] - a[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Symmetric positive-definite square root via the eigendecomposition.
pub fn spd_sqrt(a: MatRef<'_, f64>) -> Result<Mat<f64>> {
    init();
    if !is_symmetric(a, 1e-12) {
        return Err(Error::invalid("matrix is not symmetric"));
    }
    let evd = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let u = evd.U();
    let s = evd.S().column_vector();
    let p = a.nrows();
    for k in 0..p {
        if !(s[k] > 0.0) {
            return Err(Error::invalid("matrix is not positive definite"));
        }
    }
    Ok(Mat::from_fn(p, p, |i, j| {
        (0..p).map(|k| u[(i, k)] * s[k].sqrt() * u[(j, k)]).sum()
    }))
}

pub fn is_positive_definite(a: MatRef<'_, f64>) -> bool {
    init();
    if !is_symmetric(a, 1e-12) {
        return false;
    }
    match a.self_adjoint_eigenvalues(faer::Side::Lower) {
        Ok(ev) => ev.iter().all(|&v| v > 0.0),
        Err(_) => false,
    }
}

pub fn is_positive_semidefinite(a: MatRef<'_, f64>) -> bool {
    init();
    if !is_symmetric(a, 1e-12) {
        return false;
    }
    let scale = max_abs(a).max(1.0);
    match a.self_adjoint_eigenvalues(faer::Side::Lower) {
        Ok(ev) => ev.iter().all(|&v| v >= -1e-12 * scale),
        Err(_) => false,
    }
}

pub fn column(values: &[f64]) -> Mat<f64> {
    Mat::from_fn(values.len(), 1, |i, _| values[i])
}

pub fn column_to_vec(m: MatRef<'_, f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

/// Row-major nested vectors into a dense matrix.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch("ragged rows".into()));
    }
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: MatRef<'_, f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
