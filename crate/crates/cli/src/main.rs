use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sketchlsq::bench::{
    break_even_r, fit_cost_model, time_solve, write_timing_csv, CostModel, TimedMethod, TimingSession,
};
use sketchlsq::experiment::config::{manifest_path, manifest_text, recipes, RunConfig, SourceKind};
use sketchlsq::experiment::{method_theory, read_results_csv, run_empirical, run_grid, write_results_csv};
use sketchlsq::plot::{emit_plot, PlotStyle};
use sketchlsq::regression::{generate_gaussian_design, simulate_response, GroundTruth};
use sketchlsq::sketch::{draw_sketch, SketchOptions};
use sketchlsq::{DiscreteDistribution, Metric, SketchMethod};

#[derive(Parser)]
#[command(name = "sketchlsq", version, about = "Sketch-and-solve least squares experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the asymptotic and finite-sample formulas
    Theory {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Monte-Carlo sweep over methods and sketch sizes
    Simulate {
        /// Start from a named recipe: fig1-small, fig1-large or fig3
        #[arg(long)]
        recipe: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sketch-and-solve on a CSV dataset (RE and OE)
    Empirical {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        response: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Time full and sketched solves, fit the cost model
    Bench {
        /// Problem sizes as `NxP`, comma separated; defaults to --n and --p
        #[arg(long)]
        sizes: Option<String>,
        /// Sketch sizes as fractions of n
        #[arg(long, value_delimiter = ',', default_value = "0.125,0.25")]
        r_fractions: Vec<f64>,
        /// Budget fractions c for the break-even report
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1")]
        budget: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Render a results CSV as SVG
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        metric: Option<Metric>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log_y: bool,
        #[arg(long)]
        title: Option<String>,
    },
    /// Write one sketch matrix as dense CSV
    DumpSketch {
        #[arg(long)]
        method: SketchMethod,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        /// Columns of the Gaussian design used by leverage-based methods
        #[arg(long, default_value_t = 10)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags layered over the config file, in this order: file, flags, `--set`.
#[derive(Args, Default)]
struct RunArgs {
    /// Flat `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    r_list: Option<String>,
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    metric: Option<String>,
    /// sqrt (multivariate t) or raw
    #[arg(long)]
    scale_convention: Option<String>,
    /// one-minus-gamma-over-xi (default) or one-minus-gamma
    #[arg(long)]
    greedy_arg_convention: Option<String>,
    /// Any config key, as `key=value`; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self, mut cfg: RunConfig) -> Result<RunConfig> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
        }
        let flags = [
            ("n", &self.n),
            ("p", &self.p),
            ("r_list", &self.r_list),
            ("methods", &self.methods),
            ("reps", &self.reps),
            ("seed", &self.seed),
            ("metrics", &self.metric),
            ("scale_convention", &self.scale_convention),
            ("greedy_arg_convention", &self.greedy_arg_convention),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn write_manifest(out: Option<&Path>, cfg: &RunConfig, command: &str) -> Result<()> {
    if let Some(out) = out {
        let path = manifest_path(out);
        std::fs::write(&path, manifest_text(&cfg.to_text(), cfg.seed, command))?;
        eprintln!("wrote {} and {}", out.display(), path.display());
    }
    Ok(())
}

fn theory(run: &RunArgs) -> Result<()> {
    let cfg = run.resolve(RunConfig::default())?;
    let law = match cfg.source {
        SourceKind::Gaussian => Some(DiscreteDistribution::point_mass(1.0)?),
        SourceKind::TwoPoint => Some(DiscreteDistribution::two_point(cfg.d1 * cfg.d1, cfg.d2 * cfg.d2)?),
        SourceKind::HeavyTailed | SourceKind::Csv => None,
    };
    let mut w = csv::Writer::from_writer(output(run.out.as_deref())?);
    w.write_record(["method", "n", "p", "r", "gamma", "xi", "padded_n", "ve", "pe", "re", "oe", "note"])?;
    for &method in &cfg.methods {
        for &r in &cfg.r_list {
            let t = method_theory(method, cfg.n, cfg.p, r, law.as_ref(), cfg.greedy);
            let values: Vec<String> = Metric::ALL
                .iter()
                .map(|&m| t.report.map(|rep| rep.get(m).to_string()).unwrap_or_default())
                .collect();
            let mut rec = vec![
                method.to_string(),
                cfg.n.to_string(),
                cfg.p.to_string(),
                r.to_string(),
                t.gamma.to_string(),
                t.xi.to_string(),
                t.padded_n.map(|m| m.to_string()).unwrap_or_default(),
            ];
            rec.extend(values);
            rec.push(t.note);
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    drop(w);
    write_manifest(run.out.as_deref(), &cfg, "theory")
}

fn simulate(recipe: Option<&str>, run: &RunArgs) -> Result<()> {
    let base = match recipe {
        Some(name) => recipes::by_name(name, 0)?,
        None => RunConfig::default(),
    };
    let cfg = run.resolve(base)?;
    let rows = run_grid(&cfg.to_grid()?)?;
    for row in rows.iter().filter(|r| !r.note.is_empty()) {
        eprintln!("note: {} r={}: {}", row.method, row.r, row.note);
    }
    write_results_csv(&rows, output(run.out.as_deref())?)?;
    write_manifest(run.out.as_deref(), &cfg, "simulate")
}

fn empirical(csv_path: &Path, response: &str, run: &RunArgs) -> Result<()> {
    let mut cfg = run.resolve(RunConfig {
        methods: vec![SketchMethod::Gaussian, SketchMethod::Srht, SketchMethod::UniformSample],
        source: SourceKind::Csv,
        metrics: vec![Metric::Re, Metric::Oe],
        ..RunConfig::default()
    })?;
    cfg.csv_path = Some(csv_path.to_path_buf());
    cfg.response = Some(response.to_string());
    let rows = run_empirical(csv_path, response, &cfg.methods, &cfg.r_list, cfg.reps, cfg.seed)?;
    write_results_csv(&rows, output(run.out.as_deref())?)?;
    write_manifest(run.out.as_deref(), &cfg, "empirical")
}

fn parse_sizes(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|item| {
            let (n, p) = item
                .trim()
                .split_once(['x', 'X'])
                .with_context(|| format!("size `{item}` is not NxP"))?;
            Ok((n.parse()?, p.parse()?))
        })
        .collect()
}

fn bench(sizes: Option<&str>, fractions: &[f64], budget: &[f64], run: &RunArgs) -> Result<()> {
    let cfg = run.resolve(RunConfig {
        methods: vec![SketchMethod::Srht],
        reps: 5,
        ..RunConfig::default()
    })?;
    let sizes = match sizes {
        Some(s) => parse_sizes(s)?,
        None => vec![(cfg.n, cfg.p)],
    };
    let session = TimingSession::acquire()?;
    let mut records = Vec::new();
    for (k, &(n, p)) in sizes.iter().enumerate() {
        let seed = sketchlsq::rng::derive_seed(cfg.seed, k as u64);
        let x = generate_gaussian_design(n, p, None, seed)?;
        let y = simulate_response(&x, &GroundTruth::new(vec![1.0; p], 1.0)?, seed)?;
        records.push(time_solve(&session, &x, &y, TimedMethod::Full, n, cfg.reps, seed)?);
        for &method in &cfg.methods {
            for &f in fractions {
                let r = (f * n as f64).round() as usize;
                if r <= p || r > n {
                    bail!("r = {f}·{n} = {r} is outside (p, n] for p = {p}");
                }
                records.push(time_solve(&session, &x, &y, TimedMethod::Sketch(method), r, cfg.reps, seed)?);
            }
        }
    }
    drop(session);
    write_timing_csv(&records, output(run.out.as_deref())?)?;
    let (model, label) = match fit_cost_model(&records) {
        Ok(fit) => (fit.model, "fitted"),
        Err(e) => {
            eprintln!("cost model not fitted ({e}); break-even uses the reference profile");
            (CostModel::reference_profile(), "reference")
        }
    };
    eprintln!(
        "{label} cost model: a_full={:.3e} a_fwht={:.3e} a_solve={:.3e}",
        model.a_full, model.a_fwht, model.a_solve
    );
    let (n, p) = *sizes.last().expect("at least one size");
    for &c in budget {
        match break_even_r(&model, n, p, c) {
            Ok(b) => eprintln!("c={c}: break-even r={:.0} (r/n={:.3}), OE at that r={:.4}", b.r, b.r / n as f64, b.oe_lower_bound),
            Err(e) => eprintln!("c={c}: {e}"),
        }
    }
    write_manifest(run.out.as_deref(), &cfg, "bench")
}

fn plot(input: &Path, metric: Option<Metric>, out: &Path, log_y: bool, title: Option<String>) -> Result<()> {
    let rows = read_results_csv(File::open(input).with_context(|| format!("opening {}", input.display()))?)?;
    let rows: Vec<_> = match metric {
        Some(m) => rows.into_iter().filter(|r| r.metric == m).collect(),
        None => rows,
    };
    emit_plot(&rows, out, &PlotStyle { log_y, title, ..PlotStyle::default() })?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn dump_sketch(method: SketchMethod, n: usize, r: usize, p: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let p = if method.needs_design() { p } else { 1 };
    let x = generate_gaussian_design(n, p, None, seed)?;
    let op = draw_sketch(method, &x, r, seed, &SketchOptions::default())?;
    op.write_dense_csv(output(out)?)?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Theory { run } => theory(&run),
        Command::Simulate { recipe, run } => simulate(recipe.as_deref(), &run),
        Command::Empirical { csv, response, run } => empirical(&csv, &response, &run),
        Command::Bench {
            sizes,
            r_fractions,
            budget,
            run,
        } => bench(sizes.as_deref(), &r_fractions, &budget, &run),
        Command::Plot {
            input,
            metric,
            out,
            log_y,
            title,
        } => plot(&input, metric, &out, log_y, title),
        Command::DumpSketch {
            method,
            n,
            r,
            p,
            seed,
            out,
        } => dump_sketch(method, n, r, p, seed, out.as_deref()),
    }
}
