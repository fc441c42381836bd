//! `fpmsim`: run, sweep, oracle and report commands for the simulator.

mod commands;
mod report;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ddp_fpm::analyst::Strategy;
use ddp_fpm::data::IdMapping;
use ddp_fpm::patterns::PatternKind;
use ddp_fpm::runtime::NoiseMode;
use thiserror::Error;

use settings::Overrides;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("owner population exhausted before the candidate pool emptied; partial results written")]
    Exhausted,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Exhausted => 3,
            CliError::Io(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fpmsim", version = env!("FPMSIM_BUILD_ID"), about = "Private federated frequent pattern mining simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write a JSON report plus a CSV row.
    Run(RunArgs),
    /// Run a grid of experiments and write one CSV row per cell and seed.
    Sweep(SweepArgs),
    /// Exact frequent patterns of a dataset file.
    Oracle(OracleArgs),
    /// Summarise JSON reports as CSV on stdout.
    Report(ReportArgs),
}

fn parse_on_off(s: &str) -> Result<NoiseMode, String> {
    match s {
        "on" | "distributed" => Ok(NoiseMode::Distributed),
        "off" => Ok(NoiseMode::Off),
        other => Err(format!("expected `on` or `off`, got `{other}`")),
    }
}

fn parse_mapping(s: &str) -> Result<IdMapping, String> {
    match s {
        "identity" => Ok(IdMapping::Identity),
        "dense" => Ok(IdMapping::Dense),
        other => Err(format!("expected `identity` or `dense`, got `{other}`")),
    }
}

/// Experiment settings shared by `run` and `sweep`. Flags override the
/// config file, which overrides built-in defaults.
#[derive(Debug, Args)]
struct ExperimentArgs {
    /// JSON config file with any of the settings below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// item, itemset or sequence.
    #[arg(long)]
    kind: Option<PatternKind>,
    /// Target frequency in (0, 1).
    #[arg(long)]
    f: Option<f64>,
    /// Lifetime privacy budget per owner.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Candidates an owner may answer over its lifetime.
    #[arg(long)]
    k: Option<usize>,
    /// Owners per candidate per round.
    #[arg(long)]
    p: Option<usize>,
    /// Responses after which a candidate is force-decided (multiple of P).
    #[arg(long)]
    tau: Option<u64>,
    #[arg(long)]
    eta_g: Option<f64>,
    #[arg(long)]
    eta_s: Option<f64>,
    /// vanilla, padding or reusing.
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    seed: Option<u64>,
    /// `on` (distributed noise) or `off`.
    #[arg(long, value_parser = parse_on_off)]
    noise: Option<NoiseMode>,
    /// Every owner answers every candidate; implies `--noise off`.
    #[arg(long)]
    exhaustive: bool,
    /// Cap on unique owners drawn from the population.
    #[arg(long)]
    owner_cap: Option<usize>,
    /// Recycle population records once the population runs out.
    #[arg(long)]
    with_replacement: bool,
    /// Neighbours per owner in the masking graph.
    #[arg(long)]
    aggregation_degree: Option<usize>,
    /// Longest pattern considered.
    #[arg(long)]
    max_length: Option<usize>,
    /// Universe size; inferred from the data when absent.
    #[arg(long)]
    universe: Option<u32>,
    /// Whitespace-separated dataset file, one owner per line.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Token to id mapping for dataset files: identity or dense.
    #[arg(long, value_parser = parse_mapping)]
    mapping: Option<IdMapping>,
    /// Population size of the built-in synthetic workload.
    #[arg(long)]
    owners: Option<usize>,
}

impl ExperimentArgs {
    fn overrides(&self) -> Result<Overrides, CliError> {
        let file = match &self.config {
            Some(path) => Overrides::from_file(path)?,
            None => Overrides::default(),
        };
        let flags = Overrides {
            kind: self.kind,
            f: self.f,
            epsilon: self.epsilon,
            k: self.k,
            p: self.p,
            tau: self.tau,
            eta_g: self.eta_g,
            eta_s: self.eta_s,
            strategy: self.strategy,
            seed: self.seed,
            noise: self.noise,
            exhaustive: self.exhaustive.then_some(true),
            owner_cap: self.owner_cap,
            with_replacement: self.with_replacement.then_some(true),
            aggregation_degree: self.aggregation_degree,
            max_length: self.max_length,
            universe: self.universe,
            dataset: self.dataset.clone(),
            mapping: self.mapping,
            owners: self.owners,
            synthetic: None,
        };
        Ok(flags.over(file))
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output directory.
    #[arg(long, env = "FPMSIM_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Base name of the output files.
    #[arg(long, default_value = "run")]
    name: String,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Target frequencies; defaults to the single configured f.
    #[arg(long, value_delimiter = ',')]
    grid_f: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    grid_epsilon: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    grid_k: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<Strategy>,
    /// Seeds per cell: base seed, base seed + 1, ...
    #[arg(long, default_value_t = 1)]
    repeats: u64,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    f: f64,
    #[arg(long, default_value = "itemset")]
    kind: PatternKind,
    #[arg(long, value_parser = parse_mapping, default_value = "identity")]
    mapping: IdMapping,
    #[arg(long)]
    max_length: Option<usize>,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// JSON reports written by `run`.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => args.experiment.overrides().and_then(|o| commands::run(o, &args.output.out_dir, &args.output.name)),
        Command::Sweep(args) => args.experiment.overrides().and_then(|o| {
            let grid = commands::Grid {
                f: args.grid_f,
                epsilon: args.grid_epsilon,
                k: args.grid_k,
                strategies: args.strategies,
                repeats: args.repeats,
            };
            commands::sweep(o, grid, &args.output.out_dir, &args.output.name)
        }),
        Command::Oracle(args) => commands::oracle(&args.dataset, args.f, args.kind, args.mapping, args.max_length, args.out.as_deref()),
        Command::Report(args) => commands::report(&args.reports),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fpmsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
