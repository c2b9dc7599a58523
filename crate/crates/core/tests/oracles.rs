//! Cross-module checks through the public API.

use faer::Mat;
use sketchlsq::efficiency::{finite_sample_efficiencies, finite_sample_orthogonal};
use sketchlsq::experiment::{run_empirical, run_grid, DataSource, ExperimentGrid};
use sketchlsq::regression::{
    generate_elliptical_design, generate_gaussian_design, leverage_scores, ols_fit, simulate_response,
    EllipticalSpec, GroundTruth, ScaleLaw, TestPointPolicy,
};
use sketchlsq::sketch::{
    gaussian_sketch, greedy_selection, haar_sketch, leverage_sample_sketch, srht_sketch, uniform_sample_sketch,
    SketchMethod, SrhtRowSampling,
};
use sketchlsq::theory::{
    predict_gaussian_finite, predict_greedy_leverage, re_from_pe, AspectRatios, DroppedExpectation, GreedyArgument,
    GreedyConvention, TruncatedLaw,
};
use sketchlsq::{linalg, DesignMatrix, DiscreteDistribution, Metric, MonteCarloConfig};

#[test]
fn ols_small_cases() {
    let x = DesignMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
    assert!((ols_fit(&x, &[1.0, 3.0]).unwrap()[0] - 2.0).abs() < 1e-14);
    let x = generate_gaussian_design(20, 3, None, 1).unwrap();
    let y = simulate_response(&x, &GroundTruth::new(vec![1.0, 2.0, 3.0], 0.0).unwrap(), 2).unwrap();
    let beta = ols_fit(&x, &y).unwrap();
    for (b, want) in beta.iter().zip([1.0, 2.0, 3.0]) {
        assert!((b - want).abs() < 1e-10);
    }
}

#[test]
fn leverage_against_explicit_hat_matrix() {
    let x = generate_gaussian_design(50, 5, None, 3).unwrap();
    let h = leverage_scores(&x);
    let gram = linalg::matmul_tn(x.matrix(), x.matrix());
    let inv = linalg::upper_inverse(linalg::qr_r(x.matrix()).as_ref());
    let ginv = linalg::matmul(inv.as_ref(), inv.transpose());
    assert!(linalg::max_abs((&linalg::matmul(gram.as_ref(), ginv.as_ref()) - Mat::<f64>::identity(5, 5)).as_ref()) < 1e-10);
    for i in 0..50 {
        let row: Vec<f64> = (0..5).map(|j| x.matrix()[(i, j)]).collect();
        assert!((h[i] - linalg::quadratic_form(ginv.as_ref(), &row)).abs() < 1e-8);
    }
    assert!((h.iter().sum::<f64>() - 5.0).abs() < 1e-10);
    assert_eq!(greedy_selection(&[0.9, 0.5, 0.5, 0.1], 2), vec![0, 1]);
}

#[test]
fn elliptical_generators() {
    let law = DiscreteDistribution::two_point(1.0, 9.0).unwrap();
    let spec = EllipticalSpec::new(ScaleLaw::Discrete(law), None).unwrap();
    let (_, w) = generate_elliptical_design(20000, 2, &spec, 5).unwrap();
    let high = w.iter().filter(|&&v| (v * v - 9.0).abs() < 1e-9).count() as f64 / 20000.0;
    assert!((0.48..0.52).contains(&high));

    let point = EllipticalSpec::new(ScaleLaw::Discrete(DiscreteDistribution::point_mass(1.0).unwrap()), None).unwrap();
    let (x, _) = generate_elliptical_design(30, 3, &point, 9).unwrap();
    let g = generate_gaussian_design(30, 3, None, 9).unwrap();
    assert_eq!(x.matrix(), g.matrix());
}

#[test]
fn leverage_sampling_prefers_high_scale_rows() {
    let law = DiscreteDistribution::two_point(1.0, 9.0).unwrap();
    let spec = EllipticalSpec::new(ScaleLaw::Discrete(law), None).unwrap();
    let (x, w) = generate_elliptical_design(2000, 20, &spec, 4).unwrap();
    let (mut hi, mut lo) = ((0usize, 0usize), (0usize, 0usize));
    for seed in 0..20 {
        let op = leverage_sample_sketch(&x, 400, seed).unwrap();
        let kept = op.kept_rows().unwrap();
        let mut mask = vec![false; 2000];
        kept.iter().for_each(|&i| mask[i] = true);
        for i in 0..2000 {
            let slot = if w[i] > 2.0 { &mut hi } else { &mut lo };
            slot.0 += mask[i] as usize;
            slot.1 += 1;
        }
    }
    assert!(hi.0 as f64 / hi.1 as f64 > lo.0 as f64 / lo.1 as f64);
}

#[test]
fn srht_realized_rows_concentrate() {
    for seed in 0..100 {
        let r = srht_sketch(4096, 1024, seed, SrhtRowSampling::Bernoulli).unwrap().realized_rows() as f64;
        assert!((r - 1024.0).abs() <= 5.0 * 32.0);
    }
    assert_eq!(srht_sketch(4096, 1024, 0, SrhtRowSampling::ExactR).unwrap().realized_rows(), 1024);
}

#[test]
fn orthogonal_and_general_paths_agree() {
    let x = generate_gaussian_design(50, 5, None, 7).unwrap();
    let tp = TestPointPolicy::identity(5);
    for op in [uniform_sample_sketch(50, 30, 1).unwrap(), haar_sketch(50, 20, 2).unwrap()] {
        let a = finite_sample_efficiencies(&x, &op, &tp).unwrap();
        let b = finite_sample_orthogonal(&x, &op, &tp).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-10);
    }
    let full = finite_sample_orthogonal(&x, &haar_sketch(50, 50, 3).unwrap(), &tp).unwrap();
    for m in Metric::ALL {
        assert!((full.get(m) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn gaussian_sketch_is_scale_free() {
    let x = generate_gaussian_design(60, 4, None, 1).unwrap();
    let tp = TestPointPolicy::identity(4);
    let op = gaussian_sketch(60, 30, 3).unwrap();
    let base = finite_sample_efficiencies(&x, &op, &tp).unwrap();
    for c in [0.1, 10.0] {
        let scaled = sketchlsq::SketchOperator::from_dense(SketchMethod::Gaussian, op.materialize() * faer::Scale(c)).unwrap();
        let rep = finite_sample_efficiencies(&x, &scaled, &tp).unwrap();
        assert!(rep.max_abs_diff(&base) < 1e-10);
    }
}

#[test]
fn iid_universality() {
    let (n, p, r) = (1024, 50, 512);
    let x = generate_gaussian_design(n, p, None, 2).unwrap();
    let tp = TestPointPolicy::identity(p);
    let cfg = MonteCarloConfig::new(50, 3);
    let g = sketchlsq::monte_carlo_efficiency(&x, SketchMethod::Gaussian, r, &cfg, &tp).unwrap();
    let i = sketchlsq::monte_carlo_efficiency(&x, SketchMethod::IidRademacher, r, &cfg, &tp).unwrap();
    assert!((g.ve.mean - i.ve.mean).abs() / g.ve.mean < 0.05, "{} vs {}", g.ve.mean, i.ve.mean);
}

#[test]
fn empirical_residual_efficiency_matches_identity() {
    let (n, p) = (400, 20);
    let x = generate_gaussian_design(n, p, None, 8).unwrap();
    let y = simulate_response(&x, &GroundTruth::new(vec![0.3; p], 1.0).unwrap(), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("synthetic.csv");
    let mut w = csv::Writer::from_path(&path).unwrap();
    let mut header: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header).unwrap();
    for i in 0..n {
        let mut rec: Vec<String> = (0..p).map(|j| x.matrix()[(i, j)].to_string()).collect();
        rec.push(y[i].to_string());
        w.write_record(&rec).unwrap();
    }
    w.flush().unwrap();
    let rows = run_empirical(&path, "y", &[SketchMethod::Gaussian], &[n / 2], 20, 1).unwrap();
    let re = rows.iter().find(|r| r.metric == Metric::Re).unwrap();
    let gamma = p as f64 / n as f64;
    let want = re_from_pe(gamma, predict_gaussian_finite(n, p, n / 2).unwrap().pe);
    assert!((re.empirical_mean - want).abs() / want < 0.05, "{} vs {want}", re.empirical_mean);
    assert!((re.theory_value.unwrap() - want).abs() < 1e-12);
}

#[test]
fn greedy_default_convention_beats_mixed_ones() {
    let law = DiscreteDistribution::two_point(1.0, 9.0).unwrap();
    let mut grid = ExperimentGrid::new(2000, 100, vec![1000, 1600], vec![SketchMethod::GreedyLeverage]);
    grid.data_source = DataSource::Elliptical(EllipticalSpec::new(ScaleLaw::Discrete(law.clone()), None).unwrap());
    grid.metrics = vec![Metric::Ve];
    grid.reps = 10;
    grid.redraw_design = true;
    let mixed = GreedyConvention {
        argument: GreedyArgument::OneMinusGamma,
        law: TruncatedLaw::Renormalized,
        dropped: DroppedExpectation::Joint,
    };
    for row in run_grid(&grid).unwrap() {
        let a = AspectRatios::from_dims(2000, 100, row.r).unwrap();
        let default = predict_greedy_leverage(&law, a, GreedyConvention::default()).unwrap().ve;
        let alt = predict_greedy_leverage(&law, a, mixed).unwrap().ve;
        let (e_def, e_alt) = ((row.empirical_mean - default).abs(), (row.empirical_mean - alt).abs());
        assert!(e_def / default < 0.03, "r={} empirical {} theory {default}", row.r, row.empirical_mean);
        assert!(e_def < e_alt);
    }
}
