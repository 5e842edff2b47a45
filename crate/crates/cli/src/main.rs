mod commands;
mod out;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use out::Format;

#[derive(Parser, Debug)]
#[command(
    name = "ocrs",
    version,
    about = "Contention resolution schemes for k-unit and knapsack prophet inequalities"
)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Numerical tolerance (bisection width, LP tolerance).
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Output file, written atomically; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Shorthand for `--format csv`.
    #[arg(long, global = true, conflicts_with = "json")]
    pub csv: bool,
    /// Shorthand for `--format json`.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    fn format(&self) -> Format {
        if self.csv {
            Format::Csv
        } else if self.json {
            Format::Json
        } else {
            self.format
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Table of tight k-unit ratios with the classical bound and an Euler check.
    GammaK(GammaKArgs),
    /// Per-instance k-unit ratio and its optimality certificate.
    #[command(subcommand)]
    Kunit(KunitCommand),
    /// Best-fit policy on a knapsack instance.
    #[command(subcommand)]
    Knapsack(KnapsackCommand),
    /// Unit-density rate profile and policy.
    #[command(subcommand)]
    Ud(UdCommand),
    /// Builds and solves one of the linear programs.
    #[command(subcommand)]
    Lp(LpCommand),
    /// Monte Carlo evaluation of an online policy.
    Simulate(SimulateArgs),
    /// Writes a named instance as JSON.
    Generate(GenerateArgs),
    /// Runs a reproduction target; exits non-zero if any check fails.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug)]
pub struct GammaKArgs {
    /// A single `k` or an inclusive range `a..b` (at most 16).
    #[arg(long, default_value = "1..8")]
    pub k: String,
    /// Number of Euler steps per unit time.
    #[arg(long, default_value_t = 2000)]
    pub euler_n: usize,
}

/// Activity vector source: an instance file or an explicit list.
#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct PSource {
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Comma-separated activity probabilities.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct KunitArgs {
    #[command(flatten)]
    pub source: PSource,
    /// Number of units; taken from the instance sizes when omitted.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum KunitCommand {
    ThetaStar(KunitArgs),
    Certify(KunitArgs),
}

#[derive(Args, Debug)]
pub struct KnapsackRunArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// `auto` for 1/(3 + e^-2), `max` for the largest feasible constant, or a number.
    #[arg(long, default_value = "auto")]
    pub gamma: String,
    /// Monte Carlo trials on top of the exact run; 0 skips simulation.
    #[arg(long, default_value_t = 0)]
    pub trials: usize,
}

#[derive(Subcommand, Debug)]
pub enum KnapsackCommand {
    Run(KnapsackRunArgs),
}

#[derive(Subcommand, Debug)]
pub enum UdCommand {
    /// Maximizes the profile value over its starting rate.
    Optimize {
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
    },
    /// Runs the policy on a unit-density instance.
    Run {
        #[arg(long)]
        instance: PathBuf,
        /// Starting rate; optimized when omitted.
        #[arg(long)]
        gamma0: Option<f64>,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
    },
    /// Exports the rate profile as rows `(t, h, integral)`.
    Profile {
        #[arg(long)]
        gamma0: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    DualPk,
    PrimalPk,
    DualPd,
    PrimalPd,
    Up,
}

#[derive(Subcommand, Debug)]
pub enum LpCommand {
    Solve {
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long)]
        instance: PathBuf,
        /// Units for the k-unit programs; taken from the instance sizes when omitted.
        #[arg(long)]
        k: Option<usize>,
        /// Also writes the program in the line-oriented text format.
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Magician,
    Bestfit,
    Ud,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub policy: PolicyKind,
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Service rate; the policy's own default when omitted.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Step for the unit-density profile.
    #[arg(long, default_value_t = 1e-5)]
    pub delta: f64,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// knapsack-tight, large-small, ud-upper, prophet2, uniform-kunit or random.
    pub name: String,
    #[arg(long)]
    pub t: Option<u32>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub r1: Option<f64>,
    #[arg(long)]
    pub r2: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub max_scenarios: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    /// A target name or `all`.
    pub target: String,
    /// Instance count for the invariant sweep.
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("OCRS_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("OCRS_THREADS={:?} is not a thread count", v))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
        log::info!("using {} threads", n);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    init_threads()?;
    let (emit, ok) = commands::dispatch(cli)?;
    let text = emit.render(cli.format())?;
    out::write_output(cli.out.as_deref(), &text)?;
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(2)
        }
    }
}
