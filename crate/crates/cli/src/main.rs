//! `khop`: knowledge-graph QA synthesis, scoring and evaluation.
//!
//! Reports are JSON on stdout, logs go to stderr. Exit codes: 0 success,
//! 1 runtime failure, 2 usage error.

mod cache;
mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use khop::dataset::BenchmarkFormat;
use khop::ingest::DumpFormat;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "khop", version, about = "Multi-hop QA synthesis from knowledge graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a triple dump into a binary graph cache.
    Ingest(IngestArgs),
    /// Generate QA samples from a graph cache or raw dump.
    Generate(GenerateArgs),
    /// Split a dataset into train and validation files.
    Split(SplitArgs),
    /// Concatenate datasets with optional per-source subsampling.
    Merge(MergeArgs),
    /// Summarize a dataset.
    Stats(StatsArgs),
    /// Convert a benchmark file into dataset JSONL.
    Adapt(AdaptArgs),
    /// Count bigrams over the correct-answer sequences of a dataset.
    TrainBigram(TrainBigramArgs),
    /// Score every candidate answer and pick the lowest.
    Score(ScoreArgs),
    /// Accuracy and loss of a scores file against dataset labels.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Serialize)]
pub struct DumpArgs {
    /// Dump format.
    #[arg(long, default_value = "conceptnet-csv")]
    pub format: DumpFormat,
    /// Language both ConceptNet nodes must carry.
    #[arg(long = "lang", default_value = "en")]
    pub language: String,
    /// Drop rows whose weight is below this value.
    #[arg(long, default_value_t = 1.0)]
    pub min_weight: f64,
    /// Drop rows with this relation (repeatable).
    #[arg(long = "exclude-relation")]
    pub exclude_relations: Vec<String>,
}

#[derive(Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub dump: DumpArgs,
    /// Graph cache to write.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Serialize)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["graph", "input"]))]
pub struct GenerateArgs {
    /// Graph cache written by `ingest`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Raw dump, ingested on the fly.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub dump: DumpArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_distractors: u64,
    /// Samples kept per key entity and kind.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_per_key: u64,
    /// Keep every valid sample.
    #[arg(long)]
    pub no_cap: bool,
    /// Draw distractors uniformly instead of from graph structure.
    #[arg(long)]
    pub no_hard_negatives: bool,
    #[arg(long)]
    pub no_compositive: bool,
    #[arg(long)]
    pub no_conjunctive: bool,
    #[arg(long)]
    pub no_single_hop: bool,
    /// Template table (`relation<TAB>pattern` rows); defaults to the shipped one.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, default_value = "[MASK]")]
    pub mask: String,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.95, value_parser = parse_fraction)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub train_output: PathBuf,
    #[arg(long)]
    pub valid_output: PathBuf,
}

#[derive(Args, Serialize)]
pub struct MergeArgs {
    /// Dataset to merge (repeatable, in order).
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Fraction of each input to keep, in input order (default 1 each).
    #[arg(long = "weight", value_parser = parse_weight)]
    pub weights: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Drop duplicate samples after merging.
    #[arg(long)]
    pub dedup: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Serialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args, Serialize)]
pub struct AdaptArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// `csqa` or `piqa-style-binary`.
    #[arg(long)]
    pub format: BenchmarkFormat,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Serialize)]
pub struct TrainBigramArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Optional validation set for the metrics line.
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Bigram counts file to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Metrics JSONL to write.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long, default_value_t = 0.7, value_parser = parse_tau)]
    pub tau: f64,
    #[arg(long, default_value = "[MASK]")]
    pub mask: String,
}

#[derive(Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// `uniform:V`, `bigram:COUNTS` or `external:SCORES`.
    #[arg(long)]
    pub scorer: ScorerSpec,
    #[arg(long, default_value_t = 0.7, value_parser = parse_tau)]
    pub tau: f64,
    #[arg(long, default_value = "[MASK]")]
    pub mask: String,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0.7, value_parser = parse_tau)]
    pub tau: f64,
    /// Temperature sweep `start:stop:step`.
    #[arg(long, value_parser = parse_tau_grid)]
    pub tau_grid: Option<TauGrid>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", content = "arg", rename_all = "snake_case")]
pub enum ScorerSpec {
    Uniform(f64),
    Bigram(PathBuf),
    External(PathBuf),
}

impl FromStr for ScorerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| format!("expected uniform:V, bigram:PATH or external:PATH, got {s:?}"))?;
        match kind {
            "uniform" => {
                let v: f64 = arg.parse().map_err(|_| format!("bad vocabulary size {arg:?}"))?;
                if !(v >= 1.0 && v.is_finite()) {
                    return Err(format!("vocabulary size must be >= 1, got {v}"));
                }
                Ok(ScorerSpec::Uniform(v))
            }
            "bigram" if !arg.is_empty() => Ok(ScorerSpec::Bigram(arg.into())),
            "external" if !arg.is_empty() => Ok(ScorerSpec::External(arg.into())),
            _ => Err(format!("unknown scorer {s:?}")),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TauGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl TauGrid {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

fn parse_tau(s: &str) -> Result<f64, String> {
    let tau: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if tau > 0.0 && tau.is_finite() {
        Ok(tau)
    } else {
        Err(format!("temperature must be > 0, got {tau}"))
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let f: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if f > 0.0 && f < 1.0 {
        Ok(f)
    } else {
        Err(format!("fraction must be strictly between 0 and 1, got {f}"))
    }
}

fn parse_weight(s: &str) -> Result<f64, String> {
    let w: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if (0.0..=1.0).contains(&w) {
        Ok(w)
    } else {
        Err(format!("weight must be in [0, 1], got {w}"))
    }
}

fn parse_tau_grid(s: &str) -> Result<TauGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(format!("expected start:stop:step, got {s:?}"));
    };
    let (start, stop) = (parse_tau(start)?, parse_tau(stop)?);
    let step = parse_tau(step)?;
    if stop < start {
        return Err(format!("grid stop {stop} is below start {start}"));
    }
    if (stop - start) / step > 10_000.0 {
        return Err("temperature grid has more than 10000 points".into());
    }
    Ok(TauGrid { start, stop, step })
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("KHOP_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("KHOP_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("khop: error: {msg}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest(&args),
        Command::Generate(args) => commands::generate(&args),
        Command::Split(args) => commands::split(&args),
        Command::Merge(args) => commands::merge(&args),
        Command::Stats(args) => commands::stats(&args),
        Command::Adapt(args) => commands::adapt(&args),
        Command::TrainBigram(args) => commands::train_bigram(&args),
        Command::Score(args) => commands::score(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("khop: error: {e:#}");
            ExitCode::from(1)
        }
    }
}
