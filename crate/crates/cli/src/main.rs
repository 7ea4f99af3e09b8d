mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mvbound_core::bounds::BoundKind;
use mvbound_core::forest::BaggingMode;

#[derive(Parser)]
#[command(
    name = "mvbound",
    version,
    about = "PAC-Bayesian certificates for majority-vote ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a dataset, train a bagged forest and write ensemble.json.
    Train(TrainArgs),
    /// Evaluate bounds for uniform weighting of a trained ensemble.
    Bounds(BoundsArgs),
    /// Optimize posterior weights and compare test losses.
    Optimize(OptimizeArgs),
    /// Repeat split/train/evaluate over seeds, bagging modes and labeled fractions.
    Experiment(ExperimentArgs),
    /// Generate synthetic datasets or error populations.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Libsvm,
    Csv,
}

#[derive(Args, Clone)]
pub struct DataArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Defaults to csv for `.csv` files and libsvm otherwise.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// CSV column holding the label (0-based); defaults to the last column.
    #[arg(long)]
    pub label_column: Option<usize>,
}

#[derive(Args, Clone)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long = "out", env = "MVBOUND_OUT", default_value = "mvbound-out")]
    pub out: PathBuf,
}

fn parse_bagging(s: &str) -> Result<BaggingMode, String> {
    s.parse().map_err(|e: mvbound_core::Error| e.to_string())
}

fn parse_bound(s: &str) -> Result<BoundKind, String> {
    s.parse().map_err(|e: mvbound_core::Error| e.to_string())
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value = "full", value_parser = parse_bagging)]
    pub bagging: BaggingMode,
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Keep this fraction of the training part labeled; the rest becomes an
    /// unlabeled pool for DIS.
    #[arg(long)]
    pub unlabeled_r: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Subset of FO,TND,DIS,CTD,C1,C2; defaults to all defined for the task.
    #[arg(long, value_delimiter = ',', value_parser = parse_bound)]
    pub bounds: Vec<BoundKind>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Subset of FO,TND,DIS.
    #[arg(long, value_delimiter = ',', value_parser = parse_bound, default_value = "FO,TND")]
    pub optimize: Vec<BoundKind>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_bagging, default_value = "full")]
    pub bagging: Vec<BaggingMode>,
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seed: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, value_delimiter = ',', value_parser = parse_bound)]
    pub bounds: Vec<BoundKind>,
    #[arg(long, value_delimiter = ',', value_parser = parse_bound)]
    pub optimize: Vec<BoundKind>,
    /// Labeled fractions of the training part to sweep.
    #[arg(long, value_delimiter = ',')]
    pub unlabeled_r: Vec<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Subcommand)]
pub enum SynthCommand {
    /// Write a synthetic classification dataset in libsvm format.
    Dataset(SynthDatasetArgs),
    /// Oracle and sampled bounds for an error population.
    Population(SynthPopulationArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DatasetKind {
    Blobs,
    Xor,
}

#[derive(Args)]
pub struct SynthDatasetArgs {
    #[arg(long, value_enum, default_value = "blobs")]
    pub kind: DatasetKind,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    #[arg(long, default_value_t = 2.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0.0)]
    pub label_noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; defaults to `<out>/synthetic.libsvm`.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PopulationKind {
    Disjoint,
    Independent,
    Identical,
}

#[derive(Args)]
pub struct SynthPopulationArgs {
    #[arg(long, value_enum, default_value = "independent")]
    pub kind: PopulationKind,
    #[arg(long, default_value_t = 10)]
    pub hypotheses: usize,
    /// Per-hypothesis error rate (ignored for disjoint).
    #[arg(long, default_value_t = 0.3)]
    pub risk: f64,
    /// Sample size for the empirical bounds.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Bounds(a) => commands::bounds(&a),
        Command::Optimize(a) => commands::optimize(&a),
        Command::Experiment(a) => commands::experiment(&a),
        Command::Synth(SynthCommand::Dataset(a)) => commands::synth_dataset(&a),
        Command::Synth(SynthCommand::Population(a)) => commands::synth_population(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
