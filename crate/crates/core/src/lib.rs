//! Sketch-and-solve least squares.
//!
//! The crate covers the whole loop of a sketching study: generating or
//! loading a design, drawing a sketch, computing the exact efficiencies of
//! the sketched estimator, averaging them over sketch draws, and comparing
//! with the asymptotic predictions.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod bench;
pub mod distribution;
pub mod efficiency;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod montecarlo;
pub mod plot;
pub mod regression;
pub mod rng;
pub mod sketch;
pub mod theory;

pub use distribution::DiscreteDistribution;
pub use efficiency::{
    finite_sample_efficiencies, finite_sample_orthogonal, EfficiencyContext, EfficiencyReport,
    Metric,
};
pub use error::{Error, Result};
pub use regression::{
    generate_elliptical_design, generate_gaussian_design, leverage_scores, load_csv_standardize,
    ols_fit, simulate_response, DesignMatrix, EllipticalSpec, GroundTruth, ScaleConvention,
    ScaleLaw, TestPointPolicy,
};
pub use experiment::{run_empirical, run_grid, DataSource, ExperimentGrid, ResultRow, RunConfig};
pub use plot::{emit_plot, PlotStyle};
pub use montecarlo::{monte_carlo_efficiency, MetricSummary, MonteCarloConfig, MonteCarloSummary};
pub use sketch::{apply_sketch, SketchMethod, SketchOperator, SketchOptions, SketchedProblem};
pub use theory::{AspectRatios, GreedyConvention, SamplingRule, TheoryReport};
