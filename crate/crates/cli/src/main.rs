//! `shaftpower`: file-based pipeline for shaft power experiments.

mod commands;
mod error;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shaftpower::data::AngleUnit;

#[derive(Debug, Parser)]
#[command(
    name = "shaftpower",
    version,
    about = "Shaft power prediction with EF, NN and PGNN models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic voyage CSV.
    Generate(GenerateArgs),
    /// Fit the empirical-formula coefficients.
    FitEf(FitEfArgs),
    /// Fit the multiplicative polynomial RPM model.
    FitRpm(FitRpmArgs),
    /// Train a NN (lambda = 0) or PGNN predictor.
    Train(TrainArgs),
    /// Predict shaft power for a CSV.
    Predict(PredictArgs),
    /// Score a predictions CSV against measured shaft power.
    Evaluate(EvaluateArgs),
    /// Compare EF, NN and PGNN over seeded repeats.
    Compare(CompareArgs),
    /// Train one PGNN per lambda and score each on the test set.
    LambdaSweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioKind {
    /// 10 000 training and 4 000 test rows with fouling drift and a dry dock.
    Drift,
    /// Drift-free data whose test period has heavier seas.
    Waves,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PredictMethod {
    Nn,
    Ef,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Angles {
    Degrees,
    Radians,
}

impl From<Angles> for AngleUnit {
    fn from(a: Angles) -> Self {
        match a {
            Angles::Degrees => AngleUnit::Degrees,
            Angles::Radians => AngleUnit::Radians,
        }
    }
}

/// How input CSVs are read.
#[derive(Debug, Args)]
struct CsvArgs {
    /// Unit of the direction columns.
    #[arg(long, value_enum, default_value = "radians")]
    angles: Angles,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Generator config (JSON); omitted fields take their defaults.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Built-in train/test scenario; requires --test-out.
    #[arg(long, value_enum)]
    scenario: Option<ScenarioKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Row count (training rows for --scenario waves).
    #[arg(long)]
    rows: Option<usize>,
    /// Test rows for --scenario waves.
    #[arg(long)]
    test_rows: Option<usize>,
    /// Output CSV (the training split for a scenario).
    #[arg(long)]
    out: PathBuf,
    /// Test split CSV of a scenario.
    #[arg(long, requires = "scenario")]
    test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitEfArgs {
    #[arg(long)]
    train: PathBuf,
    /// Output coefficients (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Fit config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Debug, Args)]
struct FitRpmArgs {
    #[arg(long)]
    train: PathBuf,
    /// Output model (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated candidate features; speed_through_water must come first.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    #[arg(long)]
    order: Option<usize>,
    /// Choose factors greedily from the candidates.
    #[arg(long)]
    select_features: bool,
    /// Fit config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    /// EF coefficients from fit-ef; required when lambda > 0.
    #[arg(long)]
    ef: Option<PathBuf>,
    /// RPM model from fit-rpm.
    #[arg(long)]
    rpm: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output predictor (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Training config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feature groups (JSON).
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Per-epoch loss history CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Predictor (nn) or coefficients (ef) JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "nn")]
    method: PredictMethod,
    #[arg(long)]
    data: PathBuf,
    /// Output CSV `timestamp,predicted_kw`.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// CSV `timestamp,predicted_kw`.
    #[arg(long)]
    predictions: PathBuf,
    /// CSV with measured shaft power.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum, default_value = "nn")]
    method: ReportMethod,
    #[arg(long, default_value = "dataset")]
    dataset: String,
    /// Report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportMethod {
    Ef,
    Nn,
    Pgnn,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Base seed; repeat i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dataset: Option<String>,
    /// Comparison config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Comma-separated lambdas; defaults to 0.05, 0.10, ..., 1.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dataset: Option<String>,
    /// Comparison config (JSON); its train, ef and rpm sections apply.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("{}", first.trim());
            return ExitCode::from(2);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.one_line());
            ExitCode::FAILURE
        }
    }
}
