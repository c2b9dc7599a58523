//! Exact efficiencies of sketch-and-solve conditional on `(X, S)`.
//!
//! With `Q₀ = (XᵀSᵀSX)⁻¹XᵀSᵀS`, `Q₁ = Q₀Q₀ᵀ` and `Q₂ = XQ₁Xᵀ`, taking
//! expectations over the noise only gives
//!
//! ```text
//! VE = tr Q₁ / tr (XᵀX)⁻¹
//! PE = tr Q₂ / p
//! OE = (1 + x_tᵀQ₁x_t) / (1 + x_tᵀ(XᵀX)⁻¹x_t)
//! RE = (n − 2p + tr Q₂) / (n − p)
//! ```
//!
//! The RE line follows from the sketched residual `Y − Xβ̂_s = (I − H̃)ε` with
//! `H̃ = XQ₀`: `E‖(I − H̃)ε‖² = σ²(n − 2 tr H̃ + tr H̃H̃ᵀ)`, `tr H̃ = p` and
//! `tr H̃H̃ᵀ = tr Q₂`, while the full residual has expectation `σ²(n − p)`.
//!
//! When `SᵀS` is idempotent, `Q₁` collapses to `(XᵀSᵀSX)⁻¹` and only the
//! triangular factor of `SX` is needed.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::regression::{DesignMatrix, TestPointPolicy};
use crate::sketch::{GramStructure, SketchOperator};

/// Tolerance on `(SᵀS)² = SᵀS` for [`finite_sample_orthogonal`].
pub const IDEMPOTENCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub ve: f64,
    pub pe: f64,
    pub re: f64,
    pub oe: f64,
}

impl EfficiencyReport {
    pub const ONES: Self = Self {
        ve: 1.0,
        pe: 1.0,
        re: 1.0,
        oe: 1.0,
    };

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Ve => self.ve,
            Metric::Pe => self.pe,
            Metric::Re => self.re,
            Metric::Oe => self.oe,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        Metric::ALL
            .iter()
            .map(|&m| (self.get(m) - other.get(m)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ve,
    Pe,
    Re,
    Oe,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Ve, Metric::Pe, Metric::Re, Metric::Oe];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Ve => "ve",
            Metric::Pe => "pe",
            Metric::Re => "re",
            Metric::Oe => "oe",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "ve" => Metric::Ve,
            "pe" => Metric::Pe,
            "re" => Metric::Re,
            "oe" => Metric::Oe,
            other => return Err(Error::invalid(format!("unknown metric `{other}`"))),
        })
    }
}

/// Quantities of the full problem reused across sketch draws.
#[derive(Debug, Clone)]
pub struct EfficiencyContext<'a> {
    x: &'a DesignMatrix,
    r_x: Mat<f64>,
    gram: Mat<f64>,
    trace_full: f64,
    oe_full: f64,
    test_points: TestPointPolicy,
}

impl<'a> EfficiencyContext<'a> {
    pub fn new(x: &'a DesignMatrix, test_points: &TestPointPolicy) -> Result<Self> {
        test_points.validate(x.ncols())?;
        let r_x = linalg::qr_r(x.matrix());
        let r_inv = linalg::upper_inverse(r_x.as_ref());
        let full = linalg::matmul(r_inv.as_ref(), r_inv.transpose());
        let trace_full = linalg::trace(full.as_ref());
        let oe_full = 1.0 + test_quadratic(test_points, full.as_ref());
        let gram = linalg::matmul_tn(r_x.as_ref(), r_x.as_ref());
        Ok(Self {
            x,
            r_x,
            gram,
            trace_full,
            oe_full,
            test_points: test_points.clone(),
        })
    }

    pub fn design(&self) -> &DesignMatrix {
        self.x
    }

    fn report(&self, q1: MatRef<'_, f64>, trace_q2: f64) -> Result<EfficiencyReport> {
        let (n, p) = (self.x.nrows() as f64, self.x.ncols() as f64);
        let report = EfficiencyReport {
            ve: linalg::trace(q1) / self.trace_full,
            pe: trace_q2 / p,
            re: (n - 2.0 * p + trace_q2) / (n - p),
            oe: (1.0 + test_quadratic(&self.test_points, q1)) / self.oe_full,
        };
        if Metric::ALL.iter().any(|&m| !report.get(m).is_finite()) {
            return Err(Error::NonFinite(format!("{report:?}")));
        }
        Ok(report)
    }

    /// General path, valid for any `S`.
    pub fn general(&self, op: &SketchOperator) -> Result<EfficiencyReport> {
        let (sketched, r_inv) = sketched_factor(op, self.x)?;
        // Q₀ = R_s⁻¹ Q_sᵀ S, so Q₁ = R_s⁻¹ (BᵀB) R_s⁻ᵀ with B = Sᵀ Q_s.
        let b = op.apply_transpose(sketched.q.as_ref())?;
        let g = linalg::matmul_tn(b.as_ref(), b.as_ref());
        let left = linalg::matmul(r_inv.as_ref(), g.as_ref());
        let q1 = linalg::matmul(left.as_ref(), r_inv.transpose());
        let trace_q2 = linalg::trace_of_product(q1.as_ref(), self.gram.as_ref());
        self.report(q1.as_ref(), trace_q2)
    }

    /// Collapsed path; the caller guarantees `(SᵀS)² = SᵀS`.
    pub(crate) fn orthogonal_unchecked(&self, op: &SketchOperator) -> Result<EfficiencyReport> {
        let (_, r_s_inv) = sketched_factor(op, self.x)?;
        let q1 = linalg::matmul(r_s_inv.as_ref(), r_s_inv.transpose());
        let m = linalg::matmul(self.r_x.as_ref(), r_s_inv.as_ref());
        self.report(q1.as_ref(), linalg::frobenius_sq(m.as_ref()))
    }

    /// Checked collapsed path.
    pub fn orthogonal(&self, op: &SketchOperator) -> Result<EfficiencyReport> {
        check_idempotent(op)?;
        self.orthogonal_unchecked(op)
    }

    /// Collapsed path when the operator's structure allows it, general path
    /// otherwise.
    pub fn evaluate(&self, op: &SketchOperator) -> Result<EfficiencyReport> {
        match op.gram_structure() {
            GramStructure::Orthonormal | GramStructure::Selection => self.orthogonal_unchecked(op),
            GramStructure::General => self.general(op),
        }
    }
}

fn test_quadratic(tp: &TestPointPolicy, a: MatRef<'_, f64>) -> f64 {
    match tp {
        TestPointPolicy::Point(x) => linalg::quadratic_form(a, x),
        TestPointPolicy::Covariance(sigma) => linalg::trace_of_product(a, sigma.as_ref()),
    }
}

/// Thin QR of `SX` after the rank and conditioning guards.
fn sketched_factor(op: &SketchOperator, x: &DesignMatrix) -> Result<(linalg::ThinQr, Mat<f64>)> {
    let p = x.ncols();
    let kept = op.realized_rows();
    if kept < p {
        return Err(Error::TooFewRows { kept, p });
    }
    let sx = op.apply(x.matrix())?;
    let qr = linalg::thin_qr(sx.as_ref());
    let r_inv = linalg::guarded_inverse(qr.r.as_ref(), kept, linalg::CONDITION_LIMIT)?;
    Ok((qr, r_inv))
}

fn check_idempotent(op: &SketchOperator) -> Result<()> {
    match op.gram_structure() {
        GramStructure::Selection => return Ok(()),
        GramStructure::Orthonormal | GramStructure::General => {}
    }
    // (SᵀS)² = SᵀS holds iff SSᵀ is idempotent on the row space; for a
    // dense operator the cheap sufficient check is SSᵀ = I.
    let s = op.materialize();
    let g = linalg::matmul(s.as_ref(), s.transpose());
    let mut worst: f64 = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - want).abs());
        }
    }
    if worst > IDEMPOTENCE_TOLERANCE {
        let st = linalg::matmul_tn(s.as_ref(), s.as_ref());
        let st2 = linalg::matmul(st.as_ref(), st.as_ref());
        let gap = linalg::max_abs((&st2 - &st).as_ref());
        if gap > IDEMPOTENCE_TOLERANCE {
            return Err(Error::Precondition(format!(
                "SᵀS is not idempotent (max deviation {gap:e})"
            )));
        }
    }
    Ok(())
}

/// Exact efficiencies through the general formulas.
pub fn finite_sample_efficiencies(
    x: &DesignMatrix,
    op: &SketchOperator,
    test_points: &TestPointPolicy,
) -> Result<EfficiencyReport> {
    EfficiencyContext::new(x, test_points)?.general(op)
}

/// Exact efficiencies for an operator with idempotent `SᵀS` (orthonormal
/// rows or a row selector).
pub fn finite_sample_orthogonal(
    x: &DesignMatrix,
    op: &SketchOperator,
    test_points: &TestPointPolicy,
) -> Result<EfficiencyReport> {
    EfficiencyContext::new(x, test_points)?.orthogonal(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{generate_gaussian_design, lstsq, GroundTruth, simulate_response};
    use crate::rng;
    use crate::sketch::{self, SketchMethod, SrhtRowSampling};

    fn design(n: usize, p: usize, seed: u64) -> DesignMatrix {
        generate_gaussian_design(n, p, None, seed).unwrap()
    }

    #[test]
    fn identity_gives_ones() {
        for seed in 0..5 {
            let x = design(40, 4, seed);
            let op = SketchOperator::identity(40);
            let tp = TestPointPolicy::identity(4);
            let general = finite_sample_efficiencies(&x, &op, &tp).unwrap();
            let orth = finite_sample_orthogonal(&x, &op, &tp).unwrap();
            assert!(general.max_abs_diff(&EfficiencyReport::ONES) <= 1e-10, "{general:?}");
            assert!(orth.max_abs_diff(&EfficiencyReport::ONES) <= 1e-10);
        }
        let x = design(16, 3, 9);
        let full = sketch::haar_sketch(16, 16, 1).unwrap();
        let rep = finite_sample_orthogonal(&x, &full, &TestPointPolicy::identity(3)).unwrap();
        assert!(rep.max_abs_diff(&EfficiencyReport::ONES) <= 1e-10);
    }

    #[test]
    fn orthogonal_matches_general() {
        let x = design(50, 5, 3);
        let tp = TestPointPolicy::Point(vec![0.3, -1.0, 2.0, 0.5, 0.1]);
        let ops = [
            sketch::uniform_sample_sketch(50, 25, 4).unwrap(),
            sketch::haar_sketch(50, 20, 5).unwrap(),
            sketch::srht_sketch(64, 20, 6, SrhtRowSampling::Bernoulli).unwrap(),
            sketch::greedy_leverage_sketch(&x, 15).unwrap(),
        ];
        for op in &ops {
            let x = if op.input_dim() == 64 { design(64, 5, 3) } else { x.clone() };
            let a = finite_sample_efficiencies(&x, op, &tp).unwrap();
            let b = finite_sample_orthogonal(&x, op, &tp).unwrap();
            assert!(a.max_abs_diff(&b) <= 1e-10, "{:?}: {a:?} vs {b:?}", op.method());
        }
    }

    #[test]
    fn orthogonal_rejects_dense_gaussian() {
        let x = design(30, 3, 1);
        let op = sketch::gaussian_sketch(30, 10, 2).unwrap();
        let err = finite_sample_orthogonal(&x, &op, &TestPointPolicy::identity(3));
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn scale_invariance() {
        let x = design(60, 4, 8);
        let tp = TestPointPolicy::identity(4);
        let s = sketch::gaussian_sketch(60, 20, 3).unwrap().materialize();
        let base = finite_sample_efficiencies(
            &x,
            &SketchOperator::from_dense(SketchMethod::Gaussian, s.clone()).unwrap(),
            &tp,
        )
        .unwrap();
        for c in [0.1, 10.0] {
            let scaled = Mat::from_fn(s.nrows(), s.ncols(), |i, j| c * s[(i, j)]);
            let op = SketchOperator::from_dense(SketchMethod::Gaussian, scaled).unwrap();
            let rep = finite_sample_efficiencies(&x, &op, &tp).unwrap();
            assert!(rep.max_abs_diff(&base) <= 1e-10);
        }
    }

    #[test]
    fn covariance_policy_matches_point_average() {
        let x = design(80, 4, 2);
        let op = sketch::gaussian_sketch(80, 20, 7).unwrap();
        let cov = finite_sample_efficiencies(&x, &op, &TestPointPolicy::identity(4)).unwrap();
        let ctx = EfficiencyContext::new(&x, &TestPointPolicy::identity(4)).unwrap();
        // Average numerator and denominator separately: OE is a ratio of
        // expectations, not an expectation of ratios.
        let sketched = ctx.general(&op).unwrap();
        let mut rng = rng::seeded(11);
        let (mut num, mut den) = (0.0, 0.0);
        for _ in 0..10_000 {
            let xt = rng::standard_normal_vec(&mut rng, 4);
            let point = TestPointPolicy::Point(xt);
            let c = EfficiencyContext::new(&x, &point).unwrap();
            let r = c.general(&op).unwrap();
            num += r.oe * c.oe_full;
            den += c.oe_full;
        }
        let averaged = num / den;
        assert_eq!(cov.oe, sketched.oe);
        assert!((averaged - cov.oe).abs() / cov.oe < 0.02, "{averaged} vs {}", cov.oe);
    }

    #[test]
    fn gaussian_ve_matches_exact_mean() {
        let (n, p, r) = (200, 10, 100);
        let x = design(n, p, 1);
        let ctx = EfficiencyContext::new(&x, &TestPointPolicy::identity(p)).unwrap();
        let draws = 2000;
        let mean = (0..draws)
            .map(|k| {
                let op = sketch::gaussian_sketch(n, r, rng::derive_seed(77, k)).unwrap();
                ctx.general(&op).unwrap().ve
            })
            .sum::<f64>()
            / draws as f64;
        let exact = 1.0 + (n - p) as f64 / (r - p - 1) as f64;
        assert!((mean - exact).abs() / exact < 0.02, "{mean} vs {exact}");
    }

    #[test]
    fn residual_formula_matches_simulated_residuals() {
        let (n, p) = (60, 5);
        let x = design(n, p, 4);
        let op = sketch::gaussian_sketch(n, 20, 9).unwrap();
        let rep = finite_sample_efficiencies(&x, &op, &TestPointPolicy::identity(p)).unwrap();
        let truth = GroundTruth::new(vec![1.0; p], 1.0).unwrap();
        let (mut sketched_rss, mut full_rss) = (0.0, 0.0);
        for k in 0..4000 {
            let y = simulate_response(&x, &truth, rng::derive_seed(5, k)).unwrap();
            let prob = sketch::apply_sketch(&op, &x, &y).unwrap();
            for (beta, acc) in [(prob.solve().unwrap(), &mut sketched_rss), (lstsq(x.matrix(), &y).unwrap(), &mut full_rss)] {
                let fit = linalg::matmul(x.matrix(), linalg::column(&beta).as_ref());
                *acc += (0..n).map(|i| (y[i] - fit[(i, 0)]).powi(2)).sum::<f64>();
            }
        }
        let ratio = sketched_rss / full_rss;
        assert!((ratio - rep.re).abs() / rep.re < 0.03, "{ratio} vs {}", rep.re);
    }

    #[test]
    fn ve_is_at_least_one() {
        let x = design(64, 6, 12);
        let tp = TestPointPolicy::identity(6);
        let ctx = EfficiencyContext::new(&x, &tp).unwrap();
        for seed in 0..10 {
            for method in SketchMethod::ALL {
                let op = sketch::draw_sketch(method, &x, 32, seed, &Default::default()).unwrap();
                if let Ok(rep) = ctx.evaluate(&op) {
                    assert!(rep.ve >= 1.0 - 1e-6, "{method}: {rep:?}");
                }
            }
        }
    }

    #[test]
    fn too_few_rows_is_retryable() {
        let x = design(20, 5, 1);
        let op = SketchOperator::from_rows(SketchMethod::UniformSample, 20, vec![1, 2]).unwrap();
        let err = finite_sample_efficiencies(&x, &op, &TestPointPolicy::identity(5)).unwrap_err();
        assert!(err.is_retryable());
    }
}
