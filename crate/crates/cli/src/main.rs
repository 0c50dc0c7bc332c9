//! `gml`: ground metric learning for transportation distances.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gml_core::eval::{
    knn_eval, run_experiment, synth_generate, Baseline, EmdDistance, ExperimentConfig, HistogramDistance,
    LabeledDataset,
};
use gml_core::io::{fmt_num, matrix_to_csv, read_histogram, read_matrix_csv};
use gml_core::metric::METRIC_TOLERANCE;
use gml_core::{
    gml_descent, initial_point, normalize_weights, project_feasible, solve_transport, triangle_fix,
    uniform_metric, InitKind, MetricMatrix, NeighborCount, ProjectionOptions, TrainingSet,
};

#[derive(Parser)]
#[command(name = "gml", version, about = "Learn ground metrics for earth mover's distances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distance (and optionally the optimal plan) between two histogram files.
    Emd {
        r: PathBuf,
        c: PathBuf,
        /// Ground metric as a square CSV matrix; defaults to the uniform metric.
        #[arg(long)]
        metric: Option<PathBuf>,
        /// Also print the optimal transport plan.
        #[arg(long)]
        plan: bool,
    },
    /// Project a square CSV matrix onto the metric cone.
    Project {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Rescale the result into the Frobenius unit ball.
        #[arg(long)]
        unit_ball: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Compute an initial metric from a labeled dataset.
    Init {
        data: PathBuf,
        #[arg(long, default_value = "typical")]
        kind: InitKind,
        #[arg(long, default_value = "all")]
        k: NeighborCount,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        mix: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Learn a metric by projected subgradient descent.
    Train(TrainArgs),
    /// Generate a synthetic planted-block dataset.
    Synth {
        /// Experiment-style config whose `[synth]` table is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        n_per_class: Option<usize>,
        /// Destination; `.json` selects JSON, anything else CSV.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// kNN recall and error curves on a dataset's test split.
    Eval {
        data: PathBuf,
        /// `l1`, `l2`, `hellinger`, or `emd`.
        #[arg(long, default_value = "emd")]
        distance: String,
        /// Ground metric for `emd`; defaults to the uniform metric.
        #[arg(long)]
        metric: Option<PathBuf>,
        #[arg(long, default_value_t = 15)]
        kappa_max: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Run an experiment config and write report.csv, objectives.csv and manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Args)]
struct TrainArgs {
    data: PathBuf,
    /// Experiment-style config whose `[gml]` and `[init]` tables are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<NeighborCount>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    pmax: Option<usize>,
    #[arg(long)]
    qmax: Option<usize>,
    /// `uniform`, `independence`, `typical`, or a CSV file with a feasible metric.
    #[arg(long)]
    init: Option<String>,
    /// Square CSV of pair weights replacing the label-derived ones; normalized per sign.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Write the per-step trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl Output {
    fn emit(&self, text: &str) -> Result<()> {
        match &self.output {
            Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                std::io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }
}

fn load_metric(path: &Path) -> Result<MetricMatrix> {
    let a = read_matrix_csv(path).with_context(|| format!("reading {}", path.display()))?;
    MetricMatrix::new(a, METRIC_TOLERANCE).with_context(|| format!("{} is not a metric", path.display()))
}

fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    LabeledDataset::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn train_set(data: &LabeledDataset, weights: Option<&Path>) -> Result<TrainingSet> {
    let base = data.training_set()?;
    match weights {
        None => Ok(base),
        Some(p) => {
            let w = read_matrix_csv(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(normalize_weights(&base.with_weights(w)?)?)
        }
    }
}

fn train(args: &TrainArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let mut gml = cfg.gml.clone();
    if let Some(k) = args.k {
        gml.k = k;
    }
    if let Some(t0) = args.t0 {
        gml.t0 = t0;
    }
    if let Some(p) = args.pmax {
        gml.p_max = p;
    }
    if let Some(q) = args.qmax {
        gml.q_max = q;
    }
    let data = load_dataset(&args.data)?;
    let train = train_set(&data, args.weights.as_deref())?;
    let m0 = match &args.init {
        Some(s) if s.parse::<InitKind>().is_err() => {
            let m = load_metric(Path::new(s))?;
            if m.frobenius_norm() > 1.0 + 1e-9 {
                bail!("initial metric {s} lies outside the unit ball");
            }
            m
        }
        other => {
            let mut init = cfg.init.clone();
            if let Some(s) = other {
                init.kind = s.parse()?;
            }
            initial_point(&train, &init)?
        }
    };
    let res = gml_descent(&train, &m0, &gml)?;
    log::info!(
        "C_{} = {} after {} rounds and {} steps",
        gml.k,
        fmt_num(res.value),
        res.trace.outer.len(),
        res.trace.steps.len()
    );
    if let Some(p) = &args.trace {
        let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        res.trace.write_csv(std::io::BufWriter::new(f), &gml)?;
    }
    args.out.emit(&matrix_to_csv(res.metric.as_array()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Emd { r, c, metric, plan } => {
            let r = read_histogram(&r).with_context(|| format!("reading {}", r.display()))?;
            let c = read_histogram(&c).with_context(|| format!("reading {}", c.display()))?;
            let m = match metric {
                Some(p) => load_metric(&p)?,
                None => uniform_metric(r.dim())?,
            };
            let res = solve_transport(m.as_array(), &r, &c, None)?;
            let mut out = format!("emd\n{}\n", fmt_num(res.value));
            if plan {
                out.push('\n');
                out.push_str(&matrix_to_csv(&res.plan.entries));
            }
            print!("{out}");
        }
        Command::Project { input, tol, unit_ball, out } => {
            let h = read_matrix_csv(&input).with_context(|| format!("reading {}", input.display()))?;
            let opts = ProjectionOptions::with_tol(tol);
            let m = if unit_ball { project_feasible(&h, &opts)? } else { triangle_fix(&h, &opts)? };
            out.emit(&matrix_to_csv(m.as_array()))?;
        }
        Command::Init { data, kind, k, lambda, mix, out } => {
            let train = load_dataset(&data)?.training_set()?;
            let params = gml_core::InitParams { kind, k, lambda, mix, ..Default::default() };
            out.emit(&matrix_to_csv(initial_point(&train, &params)?.as_array()))?;
        }
        Command::Train(args) => train(&args)?,
        Command::Synth { config, seed, d, n_per_class, output } => {
            let mut synth = load_config(config.as_deref())?.synth;
            if let Some(s) = seed {
                synth.seed = s;
            }
            if let Some(d) = d {
                synth.d = d;
            }
            if let Some(n) = n_per_class {
                synth.n_per_class = n;
            }
            let data = synth_generate(&synth)?;
            match output {
                Some(p) => data.write(&p).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{}", data.to_csv_string()),
            }
        }
        Command::Eval { data, distance, metric, kappa_max, out } => {
            let data = load_dataset(&data)?;
            let dist: Box<dyn HistogramDistance> = match distance.to_ascii_lowercase().as_str() {
                "emd" => Box::new(EmdDistance(match metric {
                    Some(p) => load_metric(&p)?,
                    None => uniform_metric(data.dim())?,
                })),
                other => {
                    if metric.is_some() {
                        bail!("--metric only applies to --distance emd");
                    }
                    Box::new(other.parse::<Baseline>()?)
                }
            };
            let curves = knn_eval(dist.as_ref(), &data, kappa_max)?;
            let mut text = String::from("kappa,recall,error\n");
            for kappa in 1..=kappa_max {
                text.push_str(&format!(
                    "{kappa},{},{}\n",
                    fmt_num(curves.recall_at(kappa)),
                    fmt_num(curves.error_at(kappa))
                ));
            }
            out.emit(&text)?;
        }
        Command::Run { config, out, workers } => {
            let mut cfg = load_config(Some(&config))?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let report = run_experiment(&cfg)?;
            report.write(&out).with_context(|| format!("writing {}", out.display()))?;
            let failed: Vec<_> = report.statuses().into_iter().filter(|s| s.error.is_some()).collect();
            for s in &failed {
                eprintln!("task {} failed: {}", s.seed, s.error.as_deref().unwrap_or(""));
            }
            if !failed.is_empty() {
                bail!("{} of {} tasks failed", failed.len(), cfg.seeds.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gml: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
