//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated. Later assignments override earlier ones, which is how command
//! line overrides are layered on top of a file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::distribution::DiscreteDistribution;
use crate::efficiency::Metric;
use crate::error::{Error, Result};
use crate::regression::{EllipticalSpec, ScaleConvention, ScaleLaw};
use crate::sketch::{SketchMethod, SrhtRowSampling};
use crate::theory::{DroppedExpectation, GreedyArgument, GreedyConvention, TruncatedLaw};

use super::{DataSource, ExperimentGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Gaussian,
    /// `w² ∈ {d1², d2²}` with equal probability.
    TwoPoint,
    /// `w` from an inverse chi-square(1) draw.
    HeavyTailed,
    Csv,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::TwoPoint => "two-point",
            Self::HeavyTailed => "heavy-tailed",
            Self::Csv => "csv",
        }
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "two-point" | "elliptical" => Ok(Self::TwoPoint),
            "heavy-tailed" | "t" => Ok(Self::HeavyTailed),
            "csv" => Ok(Self::Csv),
            other => Err(Error::invalid(format!("unknown data source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub p: usize,
    pub r_list: Vec<usize>,
    pub methods: Vec<SketchMethod>,
    pub reps: usize,
    pub seed: u64,
    pub metrics: Vec<Metric>,
    pub source: SourceKind,
    pub csv_path: Option<PathBuf>,
    pub response: Option<String>,
    pub d1: f64,
    pub d2: f64,
    pub scale_convention: ScaleConvention,
    pub greedy: GreedyConvention,
    pub srht_rows: SrhtRowSampling,
    pub sparse_density: f64,
    pub redraw_design: bool,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 2048,
            p: 102,
            r_list: vec![512, 1024, 2048],
            methods: vec![SketchMethod::Gaussian],
            reps: 10,
            seed: 0,
            metrics: Metric::ALL.to_vec(),
            source: SourceKind::Gaussian,
            csv_path: None,
            response: None,
            d1: 1.0,
            d2: 3.0,
            scale_convention: ScaleConvention::default(),
            greedy: GreedyConvention::default(),
            srht_rows: SrhtRowSampling::default(),
            sparse_density: 0.1,
            redraw_design: false,
            parallel: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::invalid(format!("bad value `{value}` for `{key}`: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::invalid(format!("bad boolean `{value}` for `{key}`"))),
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub const KEYS: [&'static str; 21] = [
        "n",
        "p",
        "r_list",
        "methods",
        "reps",
        "seed",
        "metrics",
        "source",
        "csv_path",
        "response",
        "d1",
        "d2",
        "scale_convention",
        "greedy_arg_convention",
        "greedy_law",
        "greedy_pe_expectation",
        "srht_rows",
        "sparse_density",
        "redraw_design",
        "parallel",
        "r_fractions",
    ];

    /// Assigns one key. `r_fractions` is a convenience that sets `r_list`
    /// to `round(f·n)` for each fraction, using the current `n`.
    /// `greedy_arg_convention` also sets the matching truncated law; a later
    /// `greedy_law` can still override it.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        match key.as_str() {
            "n" => self.n = parse(&key, value)?,
            "p" => self.p = parse(&key, value)?,
            "r_list" | "r" => self.r_list = parse_list(&key, value)?,
            "r_fractions" => {
                let fr: Vec<f64> = parse_list(&key, value)?;
                self.r_list = fr.iter().map(|f| (f * self.n as f64).round() as usize).collect();
            }
            "methods" | "method" => self.methods = parse_list(&key, value)?,
            "reps" => self.reps = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "metrics" | "metric" => self.metrics = parse_list(&key, value)?,
            "source" => self.source = parse(&key, value)?,
            "csv_path" => self.csv_path = Some(PathBuf::from(value.trim())),
            "response" => self.response = Some(value.trim().to_string()),
            "d1" => self.d1 = parse(&key, value)?,
            "d2" => self.d2 = parse(&key, value)?,
            "scale_convention" => self.scale_convention = parse(&key, value)?,
            "greedy_arg_convention" => {
                let dropped = self.greedy.dropped;
                self.greedy = GreedyConvention::from_argument(parse::<GreedyArgument>(&key, value)?);
                self.greedy.dropped = dropped;
            }
            "greedy_law" => self.greedy.law = parse::<TruncatedLaw>(&key, value)?,
            "greedy_pe_expectation" => self.greedy.dropped = parse::<DroppedExpectation>(&key, value)?,
            "srht_rows" => {
                self.srht_rows = match value.trim().to_ascii_lowercase().as_str() {
                    "bernoulli" => SrhtRowSampling::Bernoulli,
                    "exact" | "exact-r" | "exact_r" => SrhtRowSampling::ExactR,
                    other => return Err(Error::invalid(format!("unknown srht_rows `{other}`"))),
                }
            }
            "sparse_density" => self.sparse_density = parse(&key, value)?,
            "redraw_design" => self.redraw_design = parse_bool(&key, value)?,
            "parallel" => self.parallel = parse_bool(&key, value)?,
            other => return Err(Error::invalid(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected `key = value`", lineno + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::invalid(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    /// Resolved configuration in the same format [`apply_text`](Self::apply_text) reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n", self.n.to_string());
        kv("p", self.p.to_string());
        kv("r_list", join(&self.r_list));
        kv("methods", join(&self.methods));
        kv("reps", self.reps.to_string());
        kv("seed", self.seed.to_string());
        kv("metrics", join(&self.metrics));
        kv("source", self.source.as_str().to_string());
        if let Some(p) = &self.csv_path {
            kv("csv_path", p.display().to_string());
        }
        if let Some(r) = &self.response {
            kv("response", r.clone());
        }
        kv("d1", self.d1.to_string());
        kv("d2", self.d2.to_string());
        kv("scale_convention", self.scale_convention.to_string());
        kv("greedy_arg_convention", self.greedy.argument.to_string());
        kv("greedy_law", self.greedy.law.to_string());
        kv("greedy_pe_expectation", self.greedy.dropped.to_string());
        kv(
            "srht_rows",
            match self.srht_rows {
                SrhtRowSampling::Bernoulli => "bernoulli",
                SrhtRowSampling::ExactR => "exact",
            }
            .to_string(),
        );
        kv("sparse_density", self.sparse_density.to_string());
        kv("redraw_design", self.redraw_design.to_string());
        kv("parallel", self.parallel.to_string());
        s
    }

    pub fn data_source(&self) -> Result<DataSource> {
        Ok(match self.source {
            SourceKind::Gaussian => DataSource::Gaussian { sigma_factor: None },
            SourceKind::TwoPoint => DataSource::Elliptical(EllipticalSpec::new(
                ScaleLaw::Discrete(DiscreteDistribution::two_point(self.d1 * self.d1, self.d2 * self.d2)?),
                None,
            )?),
            SourceKind::HeavyTailed => DataSource::Elliptical(EllipticalSpec::heavy_tailed(self.p, self.scale_convention)?),
            SourceKind::Csv => DataSource::Csv {
                path: self
                    .csv_path
                    .clone()
                    .ok_or_else(|| Error::invalid("source = csv needs csv_path"))?,
                response: self
                    .response
                    .clone()
                    .ok_or_else(|| Error::invalid("source = csv needs response"))?,
            },
        })
    }

    pub fn to_grid(&self) -> Result<ExperimentGrid> {
        let mut grid = ExperimentGrid::new(self.n, self.p, self.r_list.clone(), self.methods.clone());
        grid.reps = self.reps;
        grid.root_seed = self.seed;
        grid.data_source = self.data_source()?;
        grid.metrics = self.metrics.clone();
        grid.redraw_design = self.redraw_design;
        grid.greedy = self.greedy;
        grid.options.srht_rows = self.srht_rows;
        grid.options.sparse_density = self.sparse_density;
        grid.parallel = self.parallel;
        grid.validate()?;
        Ok(grid)
    }
}

/// Manifest written next to every result file.
pub fn manifest_text(config_text: &str, seed: u64, command: &str) -> String {
    format!(
        "# sketchlsq run manifest\ncommand = {command}\nversion = {}\nresolved_seed = {seed}\n{config_text}",
        env!("CARGO_PKG_VERSION")
    )
}

/// Path of the manifest belonging to `out`: `results.csv` → `results.manifest.txt`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.txt")
}

/// Ready-made configurations for the reference sweeps.
pub mod recipes {
    use super::*;

    /// Projection and uniform-sampling sweep at `n = 2048`.
    ///
    /// `which` is `"small"` (`p = 102`) or `"large"` (`p = 819`). The sweep
    /// keeps `r − p` at a few hundred or more so that the binomial noise in
    /// the realized SRHT and uniform sketch sizes stays small.
    pub fn fig1(which: &str, seed: u64) -> Result<RunConfig> {
        let (p, fractions): (usize, Vec<f64>) = match which {
            "small" | "102" => (102, (2..=10).map(|k| k as f64 / 10.0).collect()),
            "large" | "819" => (819, (0..=8).map(|k| 0.6 + 0.05 * k as f64).collect()),
            other => return Err(Error::invalid(format!("unknown fig1 variant `{other}`"))),
        };
        let n = 2048;
        Ok(RunConfig {
            n,
            p,
            r_list: fractions.iter().map(|f| (f * n as f64).round() as usize).collect(),
            methods: vec![
                SketchMethod::Gaussian,
                SketchMethod::IidRademacher,
                SketchMethod::Haar,
                SketchMethod::Srht,
                SketchMethod::UniformSample,
            ],
            reps: 10,
            seed,
            metrics: vec![Metric::Ve],
            ..RunConfig::default()
        })
    }

    /// Randomized against greedy leverage sampling on a two-point elliptical
    /// design, `w² ∈ {1, 9}`, with a fresh design per replicate.
    pub fn fig3(seed: u64) -> RunConfig {
        RunConfig {
            n: 4000,
            p: 200,
            r_list: vec![1200, 2000, 3200],
            methods: vec![SketchMethod::LeverageSample, SketchMethod::GreedyLeverage],
            reps: 50,
            seed,
            metrics: vec![Metric::Ve],
            source: SourceKind::TwoPoint,
            d1: 1.0,
            d2: 3.0,
            redraw_design: true,
            ..RunConfig::default()
        }
    }

    pub fn by_name(name: &str, seed: u64) -> Result<RunConfig> {
        match name {
            "fig1-small" => fig1("small", seed),
            "fig1-large" => fig1("large", seed),
            "fig3" => Ok(fig3(seed)),
            other => Err(Error::invalid(format!(
                "unknown recipe `{other}` (expected fig1-small, fig1-large or fig3)"
            ))),
        }
    }
}
