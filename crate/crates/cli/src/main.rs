mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{resolve_seed, RunConfig, SEED_ENV};
use crate::error::CliError;

/// Fault detection and isolation workbench for a switched RRC circuit.
#[derive(Debug, Parser)]
#[command(name = "fdi", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; overrides the config file and FDI_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one run and write its trace CSV.
    Simulate(SimulateArgs),
    /// Generate the labeled case-study training (and validation) datasets.
    Dataset(DatasetArgs),
    /// Evaluate the ARR residuals of a trace and report the diagnosis.
    Residuals(ResidualArgs),
    /// Train a random forest on a labeled dataset.
    Train(TrainArgs),
    /// Classify the traces of a dataset with a trained forest.
    Classify(ClassifyArgs),
    /// Build the experience-based FSM from a labeled dataset.
    Importance(ImportanceArgs),
    /// Print or analyse fault signature matrices.
    #[command(subcommand)]
    Fsm(FsmCommand),
    /// Query a causal DAG.
    Dsep(DsepArgs),
    /// Test a conditional independence statement on a labeled dataset.
    Independence(IndependenceArgs),
    /// Assess the maturity of a diagnosis pipeline.
    Assess(AssessArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Scenario {
    Healthy,
    R0Down,
    CapUp,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Use a case-study scenario instead of the config's fault section.
    #[arg(long, value_enum)]
    pub scenario: Option<Scenario>,
    /// Noise standard deviation in volts; overrides the config.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Output CSV; stdout when omitted.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Also write the noise-free model curve to `<out>.computed.csv`.
    #[arg(long, requires = "out")]
    pub computed: bool,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Training dataset CSV.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Validation dataset CSV.
    #[arg(long)]
    pub validation: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ResidualArgs {
    /// Trace CSV.
    pub trace: PathBuf,
    /// Residual CSV; not written when omitted.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Healthy traces to calibrate thresholds on; defaults to generated case-study runs.
    #[arg(long)]
    pub calibrate: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled dataset CSV.
    pub dataset: PathBuf,
    /// Model file.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Train on a stratified 70% split and report accuracy on the rest.
    #[arg(long)]
    pub split: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Dataset or trace CSV.
    pub dataset: PathBuf,
    /// Model file written by `train`.
    #[arg(short, long)]
    pub model: PathBuf,
    /// Per-sample predictions CSV.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    /// Labeled dataset CSV with Healthy and fault traces.
    pub dataset: PathBuf,
    /// Write the FSM table here as well.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Also print the binarized matrix and its analysis.
    #[arg(long)]
    pub analyze: bool,
}

#[derive(Debug, Subcommand)]
enum FsmCommand {
    /// The case-study model-based FSM.
    Mb,
    /// Per-fault detectability and isolability of an FSM file.
    Analyze { file: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Format {
    Human,
    Machine,
    Both,
}

#[derive(Debug, Args)]
pub struct DsepArgs {
    /// DAG file.
    pub dag: PathBuf,
    /// Comma-separated node set.
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub y: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub given: Vec<String>,
    /// Print the Bayesian-network factorization.
    #[arg(long)]
    pub factorization: bool,
    /// List implied independencies with conditioning sets up to this size.
    #[arg(long)]
    pub implied: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct IndependenceArgs {
    /// Labeled dataset CSV.
    pub dataset: PathBuf,
    /// Column name, `label`, or `label=<Class>`.
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    #[arg(long, value_delimiter = ',')]
    pub given: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Pipeline {
    Mb,
    Eb,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Artifact {
    Fsm,
    Thresholds,
    Identifiers,
    Model,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[arg(long, value_enum, conflicts_with = "profile", required_unless_present = "profile")]
    pub pipeline: Option<Pipeline>,
    /// Artefacts to leave out of the pipeline.
    #[arg(long, value_enum, value_delimiter = ',', requires = "pipeline")]
    pub without: Vec<Artifact>,
    /// TOML capability profile.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub format: Format,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let env = std::env::var(SEED_ENV).ok();
    let seed = resolve_seed(cli.seed, file.seed, env.as_deref())?;
    let settings = file.settings(seed)?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&settings, &a),
        Command::Dataset(a) => commands::dataset(&settings, &a),
        Command::Residuals(a) => commands::residuals(&settings, &a),
        Command::Train(a) => commands::train(&settings, &a),
        Command::Classify(a) => commands::classify(&a),
        Command::Importance(a) => commands::importance(&settings, &a),
        Command::Fsm(FsmCommand::Mb) => commands::fsm_mb(),
        Command::Fsm(FsmCommand::Analyze { file }) => commands::fsm_analyze(&settings, &file),
        Command::Dsep(a) => commands::dsep(&a),
        Command::Independence(a) => commands::independence(&settings, &a),
        Command::Assess(a) => commands::assess(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
