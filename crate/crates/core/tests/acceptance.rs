//! Acceptance criteria 1–13. Prints one PASS/FAIL line per criterion and
//! exits non-zero if a gating criterion fails. Criterion 13 is timing and is
//! reported only.

use std::time::Instant;

use faer::Mat;
use rand::Rng;

use sketchlsq::bench::{break_even_r, time_solve, CostModel, TimedMethod, TimingSession};
use sketchlsq::efficiency::{finite_sample_efficiencies, Metric};
use sketchlsq::experiment::config::recipes;
use sketchlsq::experiment::run_grid;
use sketchlsq::linalg;
use sketchlsq::regression::{generate_gaussian_design, simulate_response, GroundTruth, TestPointPolicy};
use sketchlsq::rng::{derive_seed, seeded, standard_normal_matrix};
use sketchlsq::sketch::{
    fwht, greedy_leverage_sketch, haar_sketch, leverage_sample_sketch, srht_sketch, uniform_sample_sketch,
    SketchMethod, SketchOperator, SrhtRowSampling,
};
use sketchlsq::theory::closed_form::two_point_eta_inverse;
use sketchlsq::theory::{
    orthogonal_oe_rational, predict_elliptical_sampling, predict_gaussian_finite, predict_greedy_leverage,
    predict_iid, predict_orthogonal, prior_bounds, AspectRatios, BoundFamily, DroppedExpectation, GreedyArgument,
    GreedyConvention, SamplingRule, TruncatedLaw,
};
use sketchlsq::{DiscreteDistribution, MonteCarloConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_figure1() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0, String::new());
    let mut cells = 0;
    for variant in ["small", "large"] {
        let grid = recipes::fig1(variant, 2024).unwrap().to_grid().unwrap();
        for row in run_grid(&grid).unwrap() {
            let err = rel(row.empirical_mean, row.theory_value.unwrap());
            cells += 1;
            if err > worst.0 {
                worst = (err, format!("{} p={} r={}", row.method, row.p, row.r));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst.0 <= 0.05,
        format!(
            "{cells} VE cells, worst relative error {:.4} at {} (tol 0.05); runtime {secs:.1}s (target < 300s)",
            worst.0, worst.1
        ),
    )
}

fn c2_worked_example() -> Outcome {
    let (num, den) = orthogonal_oe_rational(10_000_000, 100_000, 1_000_000).unwrap();
    outcome((num, den) == (11, 10), format!("OE = {num}/{den} (expected 11/10 exactly)"))
}

fn c3_separation() -> Outcome {
    let mut rng = seeded(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let g: f64 = rng.random_range(0.01..0.9);
        let xi: f64 = rng.random_range(g + 0.01..=1.0);
        let a = AspectRatios::new(g, xi).unwrap();
        worst = worst.max((predict_iid(a).ve - predict_orthogonal(a).ve - 1.0).abs());
    }
    outcome(worst <= 1e-12, format!("max |VE_iid − VE_orth − 1| = {worst:.2e} over 100 pairs (tol 1e-12, floating point)"))
}

fn c4_eta_inverse() -> Outcome {
    let mut rng = seeded(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a: f64 = rng.random_range(0.05..25.0);
        let b: f64 = rng.random_range(0.05..25.0);
        let g: f64 = rng.random_range(0.01..0.95);
        let law = DiscreteDistribution::two_point(a, b).unwrap();
        let bisect = law.eta_inverse(1.0 - g).unwrap();
        worst = worst.max((bisect - two_point_eta_inverse(a, b, g).unwrap()).abs());
    }
    outcome(worst <= 1e-8, format!("max |bisection − closed form| = {worst:.2e} over 1000 triples (tol 1e-8)"))
}

fn orthonormality_error(s: &Mat<f64>) -> f64 {
    let sst = linalg::matmul(s.as_ref(), s.transpose());
    let eye = Mat::<f64>::identity(sst.nrows(), sst.ncols());
    linalg::max_abs((&sst - &eye).as_ref())
}

/// Sparse `(SᵀS)² = SᵀS` check with exact equality.
fn is_idempotent_gram(s: &Mat<f64>) -> bool {
    let n = s.ncols();
    let mut gram: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); n];
    for i in 0..s.nrows() {
        let nz: Vec<(usize, f64)> = (0..n).filter(|&j| s[(i, j)] != 0.0).map(|j| (j, s[(i, j)])).collect();
        for &(j, a) in &nz {
            for &(k, b) in &nz {
                *gram[j].entry(k).or_insert(0.0) += a * b;
            }
        }
    }
    (0..n).all(|i| {
        let mut sq: std::collections::BTreeMap<usize, f64> = Default::default();
        for (&k, &a) in &gram[i] {
            for (&j, &b) in &gram[k] {
                *sq.entry(j).or_insert(0.0) += a * b;
            }
        }
        sq.retain(|_, v| *v != 0.0);
        let mut g = gram[i].clone();
        g.retain(|_, v| *v != 0.0);
        sq == g
    })
}

fn c5_orthogonality() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut idempotent = true;
    for (k, n) in [256usize, 1000, 4096].into_iter().enumerate() {
        let r = n / 4;
        let seed = derive_seed(5, k as u64);
        worst = worst.max(orthonormality_error(&haar_sketch(n, r, seed).unwrap().materialize()));
        for rows in [SrhtRowSampling::Bernoulli, SrhtRowSampling::ExactR] {
            let op = srht_sketch(n, r, seed, rows).unwrap();
            worst = worst.max(orthonormality_error(&op.materialize_padded()));
        }
        let x = generate_gaussian_design(n, 8, None, seed).unwrap();
        let samplers: [SketchOperator; 3] = [
            uniform_sample_sketch(n, r, seed).unwrap(),
            leverage_sample_sketch(&x, r, seed).unwrap(),
            greedy_leverage_sketch(&x, r).unwrap(),
        ];
        for op in &samplers {
            idempotent &= is_idempotent_gram(&op.materialize());
        }
    }
    outcome(
        worst <= 1e-10 && idempotent,
        format!(
            "max ‖SSᵀ − I‖ = {worst:.2e} (tol 1e-10, haar and srht, n ∈ {{256, 1000, 4096}}); sampling (SᵀS)² = SᵀS exactly: {idempotent}"
        ),
    )
}

fn c6_fwht() -> Outcome {
    let mut rng = seeded(6);
    let mut naive_err: f64 = 0.0;
    for m in [2usize, 4, 8, 16, 32, 64] {
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = fwht(&v).unwrap();
        for i in 0..m {
            let slow: f64 = (0..m)
                .map(|j| if (i & j).count_ones() % 2 == 0 { v[j] } else { -v[j] })
                .sum::<f64>()
                / (m as f64).sqrt();
            naive_err = naive_err.max((slow - fast[i]).abs());
        }
    }
    let v: Vec<f64> = (0..1024).map(|_| rng.random_range(-1.0..1.0)).collect();
    let once = fwht(&v).unwrap();
    let twice = fwht(&once).unwrap();
    let inv = v.iter().zip(&twice).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let norm = |u: &[f64]| u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let iso = (norm(&once) - norm(&v)).abs();
    outcome(
        naive_err <= 1e-10 && inv <= 1e-12 && iso <= 1e-12,
        format!("naive {naive_err:.2e} (tol 1e-10); involution {inv:.2e}, isometry {iso:.2e} at n=1024 (tol 1e-12)"),
    )
}

fn c7_reduction() -> Outcome {
    let point = DiscreteDistribution::point_mass(1.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 1..=10 {
        for j in 1..=10 {
            let g = 0.09 * i as f64;
            let xi = g + (1.0 - g) * j as f64 / 10.0;
            let a = AspectRatios::new(g, xi.min(1.0)).unwrap();
            let ell = predict_elliptical_sampling(&point, &SamplingRule::Leverage, a).unwrap();
            let orth = predict_orthogonal(a);
            for m in Metric::ALL {
                worst = worst.max((ell.get(m) - orth.get(m)).abs());
            }
        }
    }
    outcome(worst <= 1e-10, format!("max difference {worst:.2e} over a 10×10 grid, all metrics (tol 1e-10)"))
}

fn c8_elliptical_leverage() -> Outcome {
    let start = Instant::now();
    let cfg = recipes::fig3(8);
    let grid = cfg.to_grid().unwrap();
    let rows = run_grid(&grid).unwrap();
    let mut worst = (0.0, String::new());
    for row in &rows {
        let err = rel(row.empirical_mean, row.theory_value.unwrap());
        println!(
            "    fig3 {:<15} r/n={:.1} empirical VE {:.4} (sd {:.4}) theory {:.4} rel {:.4}",
            row.method.as_str(),
            row.xi,
            row.empirical_mean,
            row.empirical_sd,
            row.theory_value.unwrap(),
            err
        );
        if err > worst.0 {
            worst = (err, format!("{} r/n={:.1}", row.method, row.xi));
        }
    }
    let law = DiscreteDistribution::two_point(1.0, 9.0).unwrap();
    let mixed = [
        GreedyConvention {
            argument: GreedyArgument::OneMinusGamma,
            law: TruncatedLaw::Renormalized,
            dropped: DroppedExpectation::Joint,
        },
        GreedyConvention {
            argument: GreedyArgument::OneMinusGammaOverXi,
            law: TruncatedLaw::SubProbability,
            dropped: DroppedExpectation::Joint,
        },
    ];
    for row in rows.iter().filter(|r| r.method == SketchMethod::GreedyLeverage) {
        let a = AspectRatios::new(row.gamma, row.xi).unwrap();
        for conv in mixed {
            let shown = match predict_greedy_leverage(&law, a, conv) {
                Ok(t) => format!("{:.4} (rel {:.3})", t.ve, rel(row.empirical_mean, t.ve)),
                Err(_) => "infeasible".to_string(),
            };
            println!("    greedy convention {conv} at r/n={:.1}: VE {shown}", row.xi);
        }
    }
    let ve = |m: SketchMethod| {
        rows.iter()
            .find(|r| r.method == m && r.r == 1200)
            .map(|r| r.empirical_mean)
            .unwrap()
    };
    let greedy_better = ve(SketchMethod::GreedyLeverage) <= ve(SketchMethod::LeverageSample);
    outcome(
        worst.0 <= 0.07 && greedy_better,
        format!(
            "worst relative error {:.4} at {} (tol 0.07); greedy ≤ randomized at r/n=0.3: {greedy_better}; runtime {:.1}s",
            worst.0,
            worst.1,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn c9_residual() -> Outcome {
    let (n, p, r) = (2048, 102, 1024);
    let x = generate_gaussian_design(n, p, None, 9).unwrap();
    let s = sketchlsq::monte_carlo_efficiency(
        &x,
        SketchMethod::IidRademacher,
        r,
        &MonteCarloConfig::new(20, 9),
        &TestPointPolicy::identity(p),
    )
    .unwrap();
    let a = AspectRatios::from_dims(n, p, r).unwrap();
    let target = a.xi() / (a.xi() - a.gamma());
    let err = rel(s.re.mean, target);
    outcome(
        err <= 0.05,
        format!("empirical RE {:.4} vs ξ/(ξ−γ) = {target:.4}, relative error {err:.4} (tol 0.05)", s.re.mean),
    )
}

fn c10_prior_bounds() -> Outcome {
    let (n, p) = (2000, 100);
    let mut ok = true;
    let mut tightest = f64::INFINITY;
    for k in 3..=20 {
        let r = n * k / 20;
        let gauss = predict_gaussian_finite(n, p, r).unwrap();
        let orth = predict_orthogonal(AspectRatios::from_dims(n, p, r).unwrap());
        let sub = prior_bounds(n, p, r, BoundFamily::Subgaussian);
        let had = prior_bounds(n, p, r, BoundFamily::Hadamard);
        for (bound, pred) in [(sub.pe, gauss.pe), (sub.re, gauss.re), (had.pe, orth.pe), (had.re, orth.re)] {
            ok &= bound > pred;
            tightest = tightest.min(bound / pred);
        }
    }
    outcome(ok, format!("all 72 bounds exceed the predictions; smallest ratio bound/prediction {tightest:.3}"))
}

fn c11_marchenko_pastur() -> Outcome {
    let (n, p) = (2000, 1000);
    let z = standard_normal_matrix(&mut seeded(11), n, p);
    let r = linalg::qr_r(z.as_ref());
    // (ZᵀZ/n)⁻¹ = n R⁻¹R⁻ᵀ, so its trace is n‖R⁻¹‖_F².
    let rinv = linalg::upper_inverse(r.as_ref());
    let mean_inverse_eigenvalue = n as f64 * linalg::frobenius_sq(rinv.as_ref()) / p as f64;
    let err = rel(mean_inverse_eigenvalue, 2.0);
    outcome(
        err <= 0.03,
        format!("(1/p) tr[(ZᵀZ/n)⁻¹] = {mean_inverse_eigenvalue:.4} vs 1/(1−γ) = 2, relative error {err:.4} (tol 0.03)"),
    )
}

fn c12_identity() -> Outcome {
    let mut rng = seeded(12);
    let mut worst: f64 = 0.0;
    for k in 0..20u64 {
        let n = rng.random_range(20..200);
        let p = rng.random_range(1..n / 2);
        let x = generate_gaussian_design(n, p, None, derive_seed(12, k)).unwrap();
        let t: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let rep = finite_sample_efficiencies(&x, &SketchOperator::identity(n), &TestPointPolicy::Point(t)).unwrap();
        worst = worst.max(Metric::ALL.iter().map(|&m| (rep.get(m) - 1.0).abs()).fold(0.0, f64::max));
    }
    outcome(worst <= 1e-10, format!("max |efficiency − 1| = {worst:.2e} over 20 problems (tol 1e-10)"))
}

fn c13_timing() -> Outcome {
    let (n, p) = (16384, 512);
    let session = TimingSession::wait();
    let x = generate_gaussian_design(n, p, None, 13).unwrap();
    let y = simulate_response(&x, &GroundTruth::new(vec![1.0; p], 1.0).unwrap(), 13).unwrap();
    let full = time_solve(&session, &x, &y, TimedMethod::Full, n, 3, 13).unwrap();
    let sk = time_solve(&session, &x, &y, TimedMethod::Sketch(SketchMethod::Srht), n / 8, 3, 13).unwrap();
    drop(session);
    let model = CostModel::reference_profile();
    // infeasible budgets count as r = p, below every feasible one
    let rs: Vec<f64> = [0.2, 0.4, 0.6, 0.8, 1.0]
        .iter()
        .map(|&c| break_even_r(&model, 70_000, 14_000, c).map_or(14_000.0, |b| b.r))
        .collect();
    let monotone = rs.windows(2).all(|w| w[0] <= w[1]) && rs[4] > 14_000.0;
    outcome(
        sk.median_seconds < full.median_seconds && monotone,
        format!(
            "full OLS {:.3}s, srht r=n/8 {:.3}s (speed-up {:.1}x); break_even_r monotone in c: {monotone}",
            full.median_seconds,
            sk.median_seconds,
            full.median_seconds / sk.median_seconds
        ),
    )
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(u32, &str, fn() -> Outcome); 13] = [
        (1, "figure-1 reproduction", c1_figure1),
        (2, "worked example OE = 1.1", c2_worked_example),
        (3, "iid/orthogonal separation", c3_separation),
        (4, "eta-inverse oracle", c4_eta_inverse),
        (5, "orthogonality and idempotence", c5_orthogonality),
        (6, "fwht correctness", c6_fwht),
        (7, "point-mass reduction", c7_reduction),
        (8, "elliptical leverage experiment", c8_elliptical_leverage),
        (9, "residual efficiency limit", c9_residual),
        (10, "prior-bound dominance", c10_prior_bounds),
        (11, "marchenko-pastur check", c11_marchenko_pastur),
        (12, "identity sketch", c12_identity),
        (13, "timing (reported, not gating)", c13_timing),
    ];
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string()) {
            continue;
        }
        let o = run();
        let gating = id != 13;
        let status = match (o.pass, gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (non-gating)",
        };
        println!("criterion {id:>2} {status}: {name}: {}", o.detail);
        if !o.pass && gating {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
