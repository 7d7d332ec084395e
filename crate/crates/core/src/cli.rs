//! Command-line front end. The `compatest` binary only forwards to [`run`].
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::compat::{CompatibilityMatrix, FreeParams};
use crate::error::Error;
use crate::estimate::{
    dce_estimate, dcer_estimate, heuristic_compatibility, holdout_estimate, lce_estimate, mce_from_summaries,
    EstimationResult, EstimatorConfig, Level,
};
use crate::experiment::{run_experiment, ExperimentConfig};
use crate::generator::{generate, DegreeDist, GeneratorSpec};
use crate::graph::{load_edge_list, load_labels, write_edge_list, write_labels, LabelSet, SparseGraph};
use crate::propagation::{label_argmax, linbp_report, PropagationConfig};
use crate::summary::{backtracking_summaries, factorized_summaries, GraphSummaries, Variant};

const FORMATS: &str = "\
Formats:
  edges     TSV lines `u<TAB>v[<TAB>w]`, 0-based ids, optional positive weight; `#` comments
  labels    TSV lines `node<TAB>class`
  H         JSON {\"k\": 3, \"H\": [[..],[..],[..]]}, symmetric with unit row sums
  summaries JSON {\"k\",\"lmax\",\"variant\",\"raw\",\"normalized\",\"zero_rows\"}
  beliefs   CSV `node,score_0,...,score_{k-1}`
  results   CSV `method,f,trial,macro_accuracy,l2_to_gs,estimate_seconds,propagate_seconds`";

#[derive(Parser, Debug)]
#[command(name = "compatest", version, about = "Compatibility estimation and belief propagation on sparsely labeled graphs", after_help = FORMATS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a planted-compatibility graph: <out>.edges.tsv, <out>.labels.tsv, <out>.manifest.json
    #[command(after_help = FORMATS)]
    Generate(GenerateArgs),
    /// Compute path summaries from a graph and seed labels (JSON)
    #[command(after_help = FORMATS)]
    Summarize(SummarizeArgs),
    /// Estimate a compatibility matrix; writes H JSON and prints energy and timing
    #[command(after_help = FORMATS)]
    Estimate(EstimateArgs),
    /// Label nodes with linearized belief propagation: <out>.labels.tsv, <out>.beliefs.csv
    #[command(after_help = FORMATS)]
    Propagate(PropagateArgs),
    /// Run a sweep from a JSON config and write result CSV
    #[command(after_help = FORMATS)]
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DistArg {
    Uniform,
    Powerlaw,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    edges: usize,
    #[arg(long)]
    classes: usize,
    /// Skew ratio h of the planted matrix
    #[arg(long, conflicts_with = "h_file", required_unless_present = "h_file")]
    h_skew: Option<f64>,
    /// Planted matrix as H JSON
    #[arg(long)]
    h_file: Option<PathBuf>,
    /// Comma-separated class fractions (default: balanced)
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "uniform")]
    dist: DistArg,
    /// Power-law coefficient
    #[arg(long, default_value_t = 0.3)]
    coefficient: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path prefix
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LabeledGraph {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    seeds: PathBuf,
    #[arg(long)]
    classes: usize,
}

impl LabeledGraph {
    fn load(&self) -> Result<(SparseGraph, LabelSet), Error> {
        Ok((load_edge_list(&self.graph)?, load_labels(&self.seeds, self.classes)?))
    }
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    #[command(flatten)]
    input: LabeledGraph,
    #[arg(long, default_value_t = 5)]
    lmax: usize,
    /// Normalization: 1 row, 2 symmetric, 3 scaled
    #[arg(long, default_value_t = 1)]
    variant: u8,
    /// Count all paths instead of non-backtracking ones
    #[arg(long)]
    backtracking: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum MethodArg {
    Mce,
    Lce,
    Dce,
    Dcer,
    Holdout,
    Heuristic,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    seeds: Option<PathBuf>,
    #[arg(long)]
    classes: Option<usize>,
    /// Precomputed summaries JSON, used instead of --graph/--seeds for mce, dce and dcer
    #[arg(long)]
    summaries: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    lmax: usize,
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1)]
    variant: u8,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Holdout partitions
    #[arg(long, default_value_t = 1)]
    splits: usize,
    #[arg(long, default_value_t = 200)]
    max_evals: usize,
    /// Heuristic High/Low pattern, rows separated by commas, e.g. LHH,HLH,HHL
    #[arg(long)]
    pattern: Option<String>,
    /// Heuristic gap between High and Low
    #[arg(long, default_value_t = 0.1)]
    gap: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output H JSON
    #[arg(long)]
    out: PathBuf,
    /// Also write the full estimation report JSON here
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PropagateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    seeds: PathBuf,
    /// H JSON
    #[arg(long)]
    h: PathBuf,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    /// Explicit scale for H, bypassing the convergence bound
    #[arg(long)]
    epsilon: Option<f64>,
    /// Stop once the largest belief change is below this
    #[arg(long)]
    converge_tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path prefix
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (overrides the config)
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
}

struct Failure {
    code: i32,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => 2,
            _ => 1,
        };
        Failure { code, msg: e.to_string() }
    }
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let out = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Propagate(a) => cmd_propagate(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match out {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::from(Error::from(e)))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure {
            code: 1,
            msg: format!("{}: {e}", path.display()),
        })
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(Error::from)?;
    writeln!(w).map_err(Error::from)?;
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn variant(i: u8) -> Result<Variant, Failure> {
    Variant::from_index(i).map_err(|e| usage(e.to_string()))
}

fn cmd_generate(a: GenerateArgs) -> Result<(), Failure> {
    let h = match (&a.h_file, a.h_skew) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            CompatibilityMatrix::from_json(&text).map_err(|e| usage(e.to_string()))?
        }
        (None, Some(h)) => CompatibilityMatrix::skew(a.classes, h).map_err(|e| usage(e.to_string()))?,
        (None, None) => return Err(usage("one of --h-skew or --h-file is required")),
    };
    if h.k() != a.classes {
        return Err(usage(format!("--classes {} but H is {}×{}", a.classes, h.k(), h.k())));
    }
    let spec = GeneratorSpec {
        n: a.nodes,
        m: a.edges,
        alpha: a.alpha.unwrap_or_else(|| vec![1.0 / a.classes as f64; a.classes]),
        h,
        dist: match a.dist {
            DistArg::Uniform => DegreeDist::Uniform,
            DistArg::Powerlaw => DegreeDist::Powerlaw {
                coefficient: a.coefficient,
            },
        },
        seed: a.seed,
    };
    spec.validate()?;
    eprintln!("generating n = {}, m = {}, k = {}", spec.n, spec.m, spec.k());
    let out = generate(&spec)?;
    let mut w = create(&with_suffix(&a.out, ".edges.tsv"))?;
    write_edge_list(&out.graph, &mut w)?;
    w.flush().map_err(Error::from)?;
    let mut w = create(&with_suffix(&a.out, ".labels.tsv"))?;
    write_labels(&out.labels, &mut w)?;
    w.flush().map_err(Error::from)?;
    write_text(&with_suffix(&a.out, ".manifest.json"), &out.manifest.to_json())?;
    eprintln!("wrote {}.{{edges.tsv,labels.tsv,manifest.json}}", a.out.display());
    Ok(())
}

fn cmd_summarize(a: SummarizeArgs) -> Result<(), Failure> {
    let v = variant(a.variant)?;
    if a.lmax == 0 {
        return Err(usage("--lmax must be >= 1"));
    }
    let (g, seeds) = a.input.load()?;
    let s = if a.backtracking {
        backtracking_summaries(&g, &seeds, a.lmax, v)?
    } else {
        factorized_summaries(&g, &seeds, a.lmax, v)?
    };
    write_text(&a.out, &s.to_json())
}

fn parse_pattern(s: &str) -> Result<Vec<Vec<Level>>, Failure> {
    s.split(',')
        .map(|row| {
            row.trim()
                .chars()
                .map(|c| match c.to_ascii_uppercase() {
                    'H' => Ok(Level::High),
                    'L' => Ok(Level::Low),
                    other => Err(usage(format!("pattern entries must be H or L, got {other:?}"))),
                })
                .collect()
        })
        .collect()
}

fn cmd_estimate(a: EstimateArgs) -> Result<(), Failure> {
    let cfg = EstimatorConfig {
        lmax: a.lmax,
        lambda: a.lambda,
        restarts: a.restarts,
        holdout_splits: a.splits,
        holdout_max_evals: a.max_evals,
        variant: variant(a.variant)?,
        ..Default::default()
    };
    let load_graph = || -> Result<(SparseGraph, LabelSet), Failure> {
        match (&a.graph, &a.seeds, a.classes) {
            (Some(g), Some(s), Some(k)) => Ok((load_edge_list(g)?, load_labels(s, k)?)),
            _ => Err(usage("--graph, --seeds and --classes are required for this method")),
        }
    };
    let summaries = |lmax: usize| -> Result<GraphSummaries, Failure> {
        match &a.summaries {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
                let s = GraphSummaries::from_json(&text)?;
                if s.lmax < lmax {
                    return Err(usage(format!("summaries cover lmax = {} < requested {lmax}", s.lmax)));
                }
                Ok(s.truncated(lmax))
            }
            None => {
                let (g, seeds) = load_graph()?;
                Ok(factorized_summaries(&g, &seeds, lmax, cfg.variant)?)
            }
        }
    };
    let check = |k: usize| -> Result<(), Failure> {
        let errs = cfg.validate(k);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs).into())
        }
    };
    let start = std::time::Instant::now();
    let result: EstimationResult = match a.method {
        MethodArg::Mce => mce_from_summaries(&summaries(1)?)?,
        MethodArg::Dce => {
            let s = summaries(cfg.lmax)?;
            check(s.k)?;
            dce_estimate(&s, &cfg, &FreeParams::uniform(s.k))?
        }
        MethodArg::Dcer => {
            let s = summaries(cfg.lmax)?;
            check(s.k)?;
            dcer_estimate(&s, &cfg, a.seed)?
        }
        MethodArg::Lce => {
            let (g, seeds) = load_graph()?;
            lce_estimate(&g, &seeds)?
        }
        MethodArg::Holdout => {
            let (g, seeds) = load_graph()?;
            check(seeds.k())?;
            holdout_estimate(&g, &seeds, &cfg, &PropagationConfig::default(), a.seed)?
        }
        MethodArg::Heuristic => {
            let pattern = parse_pattern(a.pattern.as_deref().ok_or_else(|| usage("--pattern is required for heuristic"))?)?;
            let h = heuristic_compatibility(&pattern, a.gap).map_err(|e| usage(e.to_string()))?;
            EstimationResult {
                h_hat: h,
                energy: 0.0,
                restarts_used: 0,
                wall_time: start.elapsed().as_secs_f64(),
                method: crate::estimate::Method::Heuristic,
                trace_len: 0,
                warnings: Vec::new(),
            }
        }
    };
    let total = start.elapsed().as_secs_f64();
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    write_text(&a.out, &result.h_hat.to_json())?;
    if let Some(p) = &a.report {
        write_text(p, &result.to_json(&cfg))?;
    }
    println!(
        "method={} energy={:.6e} restarts={} estimate_seconds={:.6} total_seconds={:.6}",
        result.method, result.energy, result.restarts_used, result.wall_time, total
    );
    Ok(())
}

fn cmd_propagate(a: PropagateArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.h).map_err(|e| usage(format!("{}: {e}", a.h.display())))?;
    let h = CompatibilityMatrix::from_json(&text).map_err(|e| usage(e.to_string()))?;
    let cfg = PropagationConfig {
        s: a.s,
        iterations: a.iterations,
        epsilon_override: a.epsilon,
        converge_tol: a.converge_tol,
    };
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs).into());
    }
    let g = load_edge_list(&a.graph)?;
    let seeds = load_labels(&a.seeds, h.k())?;
    let report = linbp_report(&g, &seeds, &h, &cfg)?;
    if report.epsilon.uniform_h {
        eprintln!("warning: H is uniform; every unlabeled node ties and gets class 0");
    }
    if !report.isolated_unlabeled.is_empty() {
        eprintln!(
            "warning: {} unlabeled isolated node(s) get class 0",
            report.isolated_unlabeled.len()
        );
    }
    let labels = label_argmax(&report.beliefs);
    let predicted = LabelSet::from_classes(h.k(), &labels)?;
    let mut w = create(&with_suffix(&a.out, ".labels.tsv"))?;
    write_labels(&predicted, &mut w)?;
    w.flush().map_err(Error::from)?;
    let mut w = create(&with_suffix(&a.out, ".beliefs.csv"))?;
    report.beliefs.write_csv(&mut w)?;
    w.flush().map_err(Error::from)?;
    eprintln!(
        "epsilon = {:.6}, {} iteration(s); wrote {}.{{labels.tsv,beliefs.csv}}",
        report.epsilon.value,
        report.iterations_run,
        a.out.display()
    );
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(&a.config).map_err(|e| usage(format!("{}: {e}", a.config.display())))?;
    if a.jobs.is_some() {
        cfg.jobs = a.jobs;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs).into());
    }
    let out = run_experiment(&cfg)?;
    let w = create(&a.out)?;
    out.write_csv(w)?;
    eprintln!("wrote {}", a.out.display());
    Ok(())
}
