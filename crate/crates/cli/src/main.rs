//! `pce`: principal causal effect estimation from the command line.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "pce", version, about = "Principal causal effects under principal ignorability")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Point estimates and optional bootstrap intervals.
    #[command(args_override_self = true)]
    Estimate(EstimateArgs),
    /// Tilted doubly robust estimates over a grid of sensitivity parameters.
    #[command(args_override_self = true)]
    Sensitivity(SensitivityArgs),
    /// Covariate balance diagnostics for the fitted weights.
    #[command(args_override_self = true)]
    Balance(BalanceArgs),
    /// Simulation study over the misspecification scenarios.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "z")]
    pub z: String,
    #[arg(long, default_value = "s")]
    pub s: String,
    #[arg(long, default_value = "y")]
    pub y: String,
    /// Comma-separated covariate columns; default is every other column.
    #[arg(long)]
    pub x: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Treatment assigned completely at random: `π(X) = n₁/n`.
    #[arg(long)]
    pub randomized: bool,
    /// No control unit takes up the intermediate variable (`S₀ = 0`).
    #[arg(long)]
    pub strong_monotonicity: bool,
    /// Clamp negative fitted `e₁₀(X)` at zero.
    #[arg(long)]
    pub truncate_scores: bool,
    /// Clamp `π̂(X)` into `[trim, 1 − trim]`.
    #[arg(long, default_value_t = 0.0)]
    pub trim: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiArg {
    Percentile,
    Normal,
}

#[derive(Args, Debug, Clone)]
pub struct BootArgs {
    /// Number of bootstrap replicates; omit for point estimates only.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long, value_enum, default_value = "percentile")]
    pub ci: CiArg,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Flat `key = value` file; command-line flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// `all` or a comma-separated list such as `tr,ps-om`.
    #[arg(long, default_value = "all")]
    pub estimators: String,
}

#[derive(Args, Debug, Clone)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// Comma-separated `ε` values (`ε₁ = ε₀`) or `ε₁:ε₀` pairs.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub eps0: Option<f64>,
    /// Comma-separated log-linear coefficients, one per covariate.
    #[arg(long)]
    pub eta1: Option<String>,
    #[arg(long)]
    pub eta0: Option<String>,
    /// `sens-dr`, `sens-w` or both.
    #[arg(long, default_value = "sens-dr")]
    pub estimators: String,
}

#[derive(Args, Debug, Clone)]
pub struct BalanceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// Comma-separated terms `name` or `name^2`; default is every covariate and its square.
    #[arg(long)]
    pub h: Option<String>,
    #[arg(long, default_value_t = pce::balancing::DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// `all`, or scenarios such as `yes,no,yes` separated by `;`.
    #[arg(long, default_value = "all")]
    pub scenario: String,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Required.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated estimators; default is the study set.
    #[arg(long)]
    pub estimators: Option<String>,
    /// Monte Carlo draws for the true effects; 0 skips the truth.
    #[arg(long, default_value_t = 1_000_000)]
    pub oracle_draws: usize,
}

fn run(args: Vec<String>) -> Result<u8, CliError> {
    let args = config::expand(&Cli::command(), args)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return Ok(code);
        }
    };
    let out = match &cli.command {
        Command::Estimate(a) => &a.out,
        Command::Sensitivity(a) => &a.out,
        Command::Balance(a) => &a.out,
        Command::Simulate(a) => &a.out,
    };
    if let Some(t) = out.threads {
        if t == 0 {
            return Err(CliError::Input("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Failure(format!("cannot start thread pool: {e}")))?;
    }
    match cli.command {
        Command::Estimate(a) => commands::estimate(&a),
        Command::Sensitivity(a) => commands::sensitivity(&a),
        Command::Balance(a) => commands::balance(&a),
        Command::Simulate(a) => commands::simulate(&a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
