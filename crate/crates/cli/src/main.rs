use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ratchet_core::ScenarioKind;

mod commands;
mod config;
mod output;
mod plot;

use config::{Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "ratchet", version, about = "Ring photocell simulations with optical ratchet states")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file; every key is optional.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration value by dotted key, e.g. `trap.gamma_x=2e-7`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Scenario (ratchets, np, fd); repeat to select several for multi-scenario runs.
    #[arg(long, global = true)]
    scenario: Vec<ScenarioKind>,

    /// Output directory.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    /// Also render SVG plots.
    #[arg(long, global = true)]
    plot: bool,

    /// Exit with status 3 when any solve is ambiguous or failed.
    #[arg(long, global = true)]
    strict: bool,

    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long, env = "RATCHET_THREADS", global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Ring eigenstates with optical rates and labels.
    Spectrum,
    /// Steady state of one configuration.
    Steadystate,
    /// Current, voltage and power along the trap-rate grid.
    IvCurve,
    /// Trap-optimized power over hopping and extraction rate.
    Sweep,
    /// Exciton number over photon and phonon temperatures.
    Tempmap,
    /// Ensemble-averaged load curves of disordered rings.
    Disorder,
    /// Load curves under non-radiative decay or annihilation.
    Imperfections,
    /// Structure of the annihilation channel.
    Eea,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Io(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Solver(m) => write!(f, "solver error: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ratchet_core::Error> for Failure {
    fn from(e: ratchet_core::Error) -> Self {
        use ratchet_core::Error::*;
        match e {
            InvalidParameter { .. } | TooManySites { .. } | Conflict(_) | InvalidSite { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Solver(other.to_string()),
        }
    }
}

fn run(cli: &Cli, config: &RunConfig) -> Result<output::Artifacts, Failure> {
    match cli.command {
        Command::Spectrum => commands::spectrum(config, cli.plot),
        Command::Steadystate => commands::steadystate(config),
        Command::IvCurve => commands::iv_curve(config, cli.plot),
        Command::Sweep => commands::sweep(config, cli.plot),
        Command::Tempmap => commands::tempmap(config, cli.plot),
        Command::Disorder => commands::disorder(config, cli.plot),
        Command::Imperfections => commands::imperfections(config, cli.plot),
        Command::Eea => commands::eea(config),
    }
}

fn main_inner(cli: Cli) -> Result<(), Failure> {
    let overrides = Overrides {
        set: cli.set.clone(),
        scenarios: cli.scenario.clone(),
        out: cli.out.clone(),
    };
    let config = config::load(cli.config.as_deref(), &overrides)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("`--threads` must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Solver(format!("thread pool: {e}")))?;
    let art = pool.install(|| run(&cli, &config))?;
    for path in output::write_all(&config, &art)? {
        println!("{}", path.display());
    }
    if !art.fatal.is_empty() {
        for f in &art.fatal {
            eprintln!("warning: {f}");
        }
        if cli.strict {
            return Err(Failure::Solver(format!("{} flagged solve(s) in strict mode", art.fatal.len())));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ratchet: {e}");
            ExitCode::from(e.code())
        }
    }
}
