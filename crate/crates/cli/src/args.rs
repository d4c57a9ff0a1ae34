//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{AlgorithmChoice, KwGroups, ScoreAgainst, ThresholdSpec};

#[derive(Debug, Parser)]
#[command(name = "aro-fraud", version, about = "Train, evaluate and benchmark ARO/AIS fraud detectors")]
pub struct Cli {
    /// Base seed for data generation and every training run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for splits, repeat runs and scoring.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub parallelism: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic train/test split pairs as CSV.
    Generate(GenerateArgs),
    /// Train detectors on a training CSV.
    Train(TrainArgs),
    /// Score a test CSV against trained detectors.
    Evaluate(EvaluateArgs),
    /// Train and evaluate both algorithms on every split, with statistical tests.
    Benchmark(BenchmarkArgs),
    /// Recompute the statistical tests of a benchmark report.
    Stats(StatsArgs),
}

#[derive(Debug, Default, Args)]
pub struct GeneratorFlags {
    /// Number of split pairs.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub splits: Option<u32>,
    /// Use the per-split class counts of the nine reference splits.
    #[arg(long)]
    pub reference_counts: bool,
    /// Features per record
    #[arg(long)]
    pub feature_count: Option<usize>,
    /// Per-feature distance between the class centers, in noise units.
    #[arg(long)]
    pub class_separation: Option<f64>,
    /// Standard deviation of the Gaussian feature noise
    #[arg(long)]
    pub noise_scale: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct TrainFlags {
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmChoice>,
    /// ARO training cut point.
    #[arg(long)]
    pub cut_point: Option<f64>,
    /// Choose the ARO cut point from a grid by training-split cost.
    #[arg(long)]
    pub calibrate: bool,
    /// ARO safety cap on loop iterations.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iters: Option<u64>,
    /// Unconditional AIS memory replacement.
    #[arg(long)]
    pub ais_faithful: bool,
}

#[derive(Debug, Default, Args)]
pub struct ScoringFlags {
    /// Score test records against the detectors or the raw training normals.
    #[arg(long, value_enum)]
    pub score_against: Option<ScoreAgainst>,
    /// `cut-point`, `roc` (chosen on the training split) or a number.
    #[arg(long)]
    pub threshold: Option<ThresholdSpec>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub generator: GeneratorFlags,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training split CSV.
    #[arg(long, value_name = "PATH")]
    pub train: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Detector file(s) written by `train`.
    #[arg(long, value_name = "PATH", required = true, num_args = 1..)]
    pub detectors: Vec<PathBuf>,
    /// Test split CSV.
    #[arg(long, value_name = "PATH")]
    pub test: PathBuf,
    /// Training split CSV; needed for `--threshold roc` and `--score-against raw`.
    #[arg(long, value_name = "PATH")]
    pub train: Option<PathBuf>,
    #[command(flatten)]
    pub scoring: ScoringFlags,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Directory holding `split_<id>_train.csv` / `split_<id>_test.csv`;
    /// splits are generated in memory when absent.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Repeat runs per split and algorithm; the lowest-cost run is reported.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: Option<u32>,
    #[arg(long, value_enum)]
    pub kw_groups: Option<KwGroups>,
    #[command(flatten)]
    pub generator: GeneratorFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub scoring: ScoringFlags,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// `benchmark_report.json` from a benchmark run.
    #[arg(long, value_name = "PATH")]
    pub report: PathBuf,
    /// Override the Kruskal-Wallis grouping stored in the report.
    #[arg(long, value_enum)]
    pub kw_groups: Option<KwGroups>,
}
