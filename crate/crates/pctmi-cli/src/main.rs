//! Command-line surface of the PCTMI pipeline: graph discovery on CSV
//! datasets, synthetic data generation, scoring against ground truth,
//! multi-seed benchmark sweeps, and projection of lagged full graphs onto
//! summary graphs.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pctmi::csv_io::{read_csv_path, write_csv_path};
use pctmi::datagen::{generate, subsample, GenerativeParams, StructureSpec};
use pctmi::discovery::{discover, DiscoveryConfig};
use pctmi::eval::{project_full_graph, run_benchmark, score, LaggedEdge};
use pctmi::graph::SummaryGraph;
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "pctmi", version, about = "Summary causal graph discovery on time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discover a summary causal graph from a CSV dataset
    Discover(DiscoverArgs),
    /// Simulate a named structure and write its data and ground truth
    Generate(GenerateArgs),
    /// Score a predicted graph against a ground-truth graph
    Evaluate(EvaluateArgs),
    /// Run discovery over many simulated seeds and aggregate the scores
    Bench(BenchArgs),
    /// Collapse a lagged full-graph edge list onto a summary graph
    Project(ProjectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Dot,
}

/// Discovery knobs shared by `discover` and `bench`. Every flag falls back
/// to the config file (same key names, `key=value` lines) and then to the
/// built-in defaults.
#[derive(Args)]
struct DiscoveryFlags {
    /// Largest window size searched per series [default: 5]
    #[arg(long)]
    max_window: Option<usize>,
    /// Largest start-time gap searched, in dataset ticks [default: 5]
    #[arg(long)]
    max_lag: Option<i64>,
    /// Significance level of the permutation tests [default: 0.05]
    #[arg(long)]
    alpha: Option<f64>,
    /// Neighbor count of the kNN estimator [default: 10]
    #[arg(long)]
    knn_k: Option<usize>,
    /// Replicates per permutation test [default: 100]
    #[arg(long)]
    permutations: Option<usize>,
    /// Neighborhood size of the conditional permutation scheme [default: 5]
    #[arg(long)]
    perm_neighbors: Option<usize>,
    /// Seed for jitter and permutation draws [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Smallest usable number of joint samples [default: 50]
    #[arg(long)]
    min_samples: Option<usize>,
    /// key=value file providing defaults for the flags above
    #[arg(long)]
    config: Option<PathBuf>,
}

impl DiscoveryFlags {
    fn resolve(&self) -> Result<DiscoveryConfig> {
        let mut cfg = DiscoveryConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .with_context(|| format!("config line {} is not key=value", lineno + 1))?;
                apply_config_entry(&mut cfg, key.trim(), value.trim())
                    .with_context(|| format!("config line {}", lineno + 1))?;
            }
        }
        if let Some(v) = self.max_window {
            cfg.lambda_max = v;
        }
        if let Some(v) = self.max_lag {
            cfg.gamma_max = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.knn_k {
            cfg.k = v;
        }
        if let Some(v) = self.permutations {
            cfg.n_permutations = v;
        }
        if let Some(v) = self.perm_neighbors {
            cfg.local_neighbors = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.min_samples {
            cfg.min_samples = v;
        }
        Ok(cfg)
    }
}

fn apply_config_entry(cfg: &mut DiscoveryConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "max-window" => cfg.lambda_max = parse(key, value)?,
        "max-lag" => cfg.gamma_max = parse(key, value)?,
        "alpha" => cfg.alpha = parse(key, value)?,
        "knn-k" => cfg.k = parse(key, value)?,
        "permutations" => cfg.n_permutations = parse(key, value)?,
        "perm-neighbors" => cfg.local_neighbors = parse(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        "min-samples" => cfg.min_samples = parse(key, value)?,
        other => bail!("unknown config key {other}"),
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value.parse().with_context(|| format!("bad value {value:?} for {key}"))
}

#[derive(Args)]
struct DiscoverArgs {
    /// Input dataset, wide or long CSV
    input: PathBuf,
    /// Output layout of the discovered graph
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the graph here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Keep every n-th sample per series (comma list, dataset name order)
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<usize>>,
    #[command(flatten)]
    flags: DiscoveryFlags,
}

#[derive(Args)]
struct GenerateArgs {
    /// Structure name: fork, v_structure, mediator or diamond
    #[arg(long)]
    structure: String,
    /// Emitted length per series, before any rate reduction
    #[arg(long, default_value_t = 1000)]
    t_len: usize,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lag of every cross edge, in steps
    #[arg(long, default_value_t = 1)]
    edge_lag: i64,
    /// Keep every n-th sample per series (comma list, dataset name order)
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<usize>>,
    /// Where to write the dataset CSV
    #[arg(long, default_value = "data.csv")]
    data_out: PathBuf,
    /// Where to write the ground-truth graph JSON
    #[arg(long, default_value = "truth.json")]
    truth_out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted graph JSON
    pred: PathBuf,
    /// Ground-truth graph JSON
    truth: PathBuf,
    /// Number of CI tests spent producing the prediction, echoed in the report
    #[arg(long)]
    ci_tests: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Structure name: fork, v_structure, mediator or diamond
    #[arg(long)]
    structure: String,
    /// Datasets to simulate and score
    #[arg(long, default_value_t = 10)]
    n_seeds: usize,
    /// Emitted length per series, before any rate reduction
    #[arg(long, default_value_t = 1000)]
    t_len: usize,
    /// Lag of every cross edge, in steps
    #[arg(long, default_value_t = 1)]
    edge_lag: i64,
    /// Keep every n-th sample per series (comma list, dataset name order)
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<usize>>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    flags: DiscoveryFlags,
}

#[derive(Args)]
struct ProjectArgs {
    /// JSON list of lagged edges {src, src_offset, dst, dst_offset}
    input: PathBuf,
    /// Output layout of the summary graph
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the graph here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Prints to stdout, treating a closed pipe as a normal way to stop.
fn print_out(text: &str) -> Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print_out(text)?,
    }
    Ok(())
}

fn render(graph: &SummaryGraph, format: Format) -> String {
    match format {
        Format::Json => graph.to_json_string(),
        Format::Dot => graph.to_dot(),
    }
}

fn cmd_discover(args: &DiscoverArgs) -> Result<()> {
    let cfg = args.flags.resolve()?;
    let mut ds = read_csv_path(&args.input)?;
    if let Some(factors) = &args.rates {
        ds = subsample(&ds, factors)?;
    }
    let out = discover(&ds, &cfg)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "{} CI tests (budget {:.0})",
        out.counter.ci_tests_performed, out.counter.bound
    );
    emit(&render(&out.graph, args.format), args.output.as_ref())
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let spec = StructureSpec::by_name(&args.structure, args.edge_lag)?;
    let params = GenerativeParams { t_len: args.t_len, seed: args.seed, ..Default::default() };
    let (mut ds, truth) = generate(&spec, &params)?;
    if let Some(factors) = &args.rates {
        ds = subsample(&ds, factors)?;
    }
    write_csv_path(&ds, &args.data_out)?;
    fs::write(&args.truth_out, truth.to_json_string())
        .with_context(|| format!("cannot write {}", args.truth_out.display()))?;
    eprintln!("wrote {} and {}", args.data_out.display(), args.truth_out.display());
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let pred = read_graph(&args.pred)?;
    let truth = read_graph(&args.truth)?;
    let report = score(&pred, &truth, args.ci_tests)?;
    print_out(&serde_json::to_string_pretty(&report)?)
}

fn read_graph(path: &PathBuf) -> Result<SummaryGraph> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read graph {}", path.display()))?;
    Ok(SummaryGraph::from_json_str(&text)?)
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let cfg = args.flags.resolve()?;
    let spec = StructureSpec::by_name(&args.structure, args.edge_lag)?;
    let params = GenerativeParams {
        t_len: args.t_len,
        seed: cfg.seed,
        ..Default::default()
    };
    let report =
        run_benchmark(&spec, &params, &cfg, args.n_seeds, args.rates.as_deref())?;
    eprintln!(
        "{:<12} {:>5}  {:>13}  {:>13}  {:>8}",
        "structure", "seeds", "F1", "oriented F1", "CI tests"
    );
    eprintln!(
        "{:<12} {:>5}  {:>6.3}±{:>5.3}  {:>6.3}±{:>5.3}  {:>8.1}",
        report.structure,
        report.n_seeds,
        report.f1_mean,
        report.f1_sd,
        report.f1_oriented_mean,
        report.f1_oriented_sd,
        report.ci_tests_mean
    );
    for s in &report.per_seed {
        match (&s.f1_adjacency, &s.f1_oriented, &s.error) {
            (Some(fa), Some(fo), _) => eprintln!(
                "  seed {:>20}  F1 {fa:.3}  oriented {fo:.3}  tests {}",
                s.seed,
                s.ci_tests.unwrap_or(0)
            ),
            (_, _, Some(err)) => eprintln!("  seed {:>20}  failed: {err}", s.seed),
            _ => {}
        }
    }
    emit(&serde_json::to_string_pretty(&report)?, args.output.as_ref())
}

fn cmd_project(args: &ProjectArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("cannot read {}", args.input.display()))?;
    let edges: Vec<LaggedEdge> =
        serde_json::from_str(&text).context("input is not a JSON list of lagged edges")?;
    let graph = project_full_graph(&edges)?;
    emit(&render(&graph, args.format), args.output.as_ref())
}

fn main() -> Result<()> {
    match &Cli::parse().command {
        Command::Discover(args) => cmd_discover(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Project(args) => cmd_project(args),
    }
}
