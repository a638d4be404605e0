use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::{benchmark, fit, predict, sample, train, uq};
use config::FileConfig;

/// Multi-fidelity surrogate fitting, adaptive sampling, network training,
/// benchmarking and Monte Carlo uncertainty propagation.
#[derive(Debug, Parser)]
#[command(name = "mfuq", version, arg_required_else_help = true)]
struct Cli {
    /// TOML run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $MFUQ_OUT, else ./out]. A path ending in
    /// `.json` names the model file and puts the other outputs beside it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every stochastic step [default: config `seed`, else 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit kriging or co-kriging to cheap and expensive CSVs.
    Fit(fit::Args),
    /// Evaluate a saved model at CSV points or on a grid.
    Predict(predict::Args),
    /// Adaptive infill with one of the criteria.
    Sample(sample::Args),
    /// Train the multi-fidelity network.
    Train(train::Args),
    /// Score a surrogate on an analytic benchmark case.
    Benchmark(benchmark::Args),
    /// Propagate an input distribution through a model or a benchmark.
    Uq(uq::Args),
}

/// Settings every subcommand sees.
pub struct Context {
    pub file: FileConfig,
    pub out: PathBuf,
    pub seed: u64,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let out = cli
        .out
        .or_else(|| file.out.clone())
        .or_else(|| std::env::var_os("MFUQ_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let ctx = Context { file, out, seed };
    match cli.command {
        Command::Fit(a) => fit::run(&ctx, a),
        Command::Predict(a) => predict::run(&ctx, a),
        Command::Sample(a) => sample::run(&ctx, a),
        Command::Train(a) => train::run(&ctx, a),
        Command::Benchmark(a) => benchmark::run(&ctx, a),
        Command::Uq(a) => uq::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
