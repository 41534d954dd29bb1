//! `gridwac`: power flow, controller synthesis, scenario simulation and
//! worst-case analysis on a case file.

mod commands;
mod error;

use clap::{Args, Parser, Subcommand, ValueEnum};
use error::CliError;
use gridwac::synth::Method;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "gridwac", version, about = "Wide-area control synthesis and simulation for grid NDAE models")]
struct Cli {
    /// Seed for every random draw; overrides the scenario seed when given.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the power flow of a case and print bus voltages.
    Powerflow(PowerflowArgs),
    /// Design a state-feedback gain and write the gain file and report.
    Synthesize(SynthesizeArgs),
    /// Run a scenario for the conventional system and every gain.
    Simulate(SimulateArgs),
    /// Search the worst perturbation of A and redesign every gain for it.
    Worstcase(WorstcaseArgs),
    /// Closed-loop H-infinity norm of a gain on the lifted channel.
    HinfNorm(HinfNormArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    HinfDae,
    HinfOde,
    H2Ode,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::HinfDae => Method::HinfDae,
            MethodArg::HinfOde => Method::HinfOde,
            MethodArg::H2Ode => Method::H2Ode,
        }
    }
}

#[derive(Debug, Args)]
struct CaseArg {
    /// Case file (JSON).
    #[arg(long)]
    case: PathBuf,
}

#[derive(Debug, Args)]
struct PowerflowArgs {
    #[command(flatten)]
    case: CaseArg,
    /// Write the solution here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 30)]
    max_iter: usize,
}

#[derive(Debug, Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    case: CaseArg,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Output directory for `<method>.gain` and `<method>.report.json`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Strictness margin of the descriptor LMI.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    sdp_max_iter: Option<usize>,
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    feas_tol: Option<f64>,
    /// Bisection bracket for the reduced-model H-infinity level.
    #[arg(long)]
    mu_lo: Option<f64>,
    #[arg(long)]
    mu_hi: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    case: CaseArg,
    /// Scenario file (JSON); without it the system is held at equilibrium.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Gain files, one run each.
    #[arg(long = "gain")]
    gains: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Horizon of the default scenario (s).
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
}

#[derive(Debug, Args)]
struct WorstcaseArgs {
    #[command(flatten)]
    case: CaseArg,
    /// Nominal gain files.
    #[arg(long = "gain", required = true)]
    gains: Vec<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.001)]
    nu: f64,
    #[arg(long, default_value_t = 8)]
    starts: usize,
    #[arg(long, default_value_t = 4000)]
    max_evals: usize,
    /// Draw the perturbation at random on the ball instead of searching.
    #[arg(long)]
    random: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct HinfNormArgs {
    #[command(flatten)]
    case: CaseArg,
    /// Gain file; the open loop is evaluated without one.
    #[arg(long)]
    gain: Option<PathBuf>,
    /// Perturbation file written by `worstcase`.
    #[arg(long)]
    perturbation: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("GRIDWAC_NUM_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("GRIDWAC_NUM_THREADS must be a positive integer, got `{v}`")))?;
    gridwac::par::init_global_pool(n);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Powerflow(a) => commands::powerflow(&a),
        Command::Synthesize(a) => commands::synthesize(&a),
        Command::Simulate(a) => commands::simulate(&a, cli.seed),
        Command::Worstcase(a) => commands::worstcase(&a, cli.seed),
        Command::HinfNorm(a) => commands::hinf_norm_cmd(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gridwac: {e}");
            ExitCode::from(e.code())
        }
    }
}
