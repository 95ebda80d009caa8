use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod exit;

use exit::Failure;

/// Pressure, phase transitions and fiber maps for window-constrained shifts.
#[derive(Debug, Parser)]
#[command(name = "porcupine", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Key-value configuration file (defaults are used for missing keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "PORCUPINE_THREADS")]
    threads: Option<usize>,
    /// Seed for every sampled quantity; overrides `sampling.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Choose the window triples and write a schedule document.
    Schedule(commands::ScheduleArgs),
    /// Scan the pressure envelope of a schedule and emit CSV.
    Pressure(commands::PressureArgs),
    /// Locate and certify every kink of a schedule.
    Transitions(commands::TransitionsArgs),
    /// Sample connector lengths for every piece of a schedule.
    Mixing(commands::MixingArgs),
    /// Check the fiber map conditions and the expanding itinerary.
    FiberValidate(commands::FiberArgs),
    /// Sample central Lyapunov exponents and estimate the spectral gap.
    Lyapunov(commands::LyapunovArgs),
    /// Run the full acceptance suite.
    Verify(commands::VerifyArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(exit::USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("porcupine: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::internal(format!("thread pool: {e}")))?;
    }
    let mut config = commands::load_config(cli.global.config.as_deref())?;
    if let Some(seed) = cli.global.seed {
        config.sampling.seed = seed;
    }
    match cli.command {
        Command::Schedule(a) => commands::schedule(&config, &a),
        Command::Pressure(a) => commands::pressure(&config, &a),
        Command::Transitions(a) => commands::transitions(&config, &a),
        Command::Mixing(a) => commands::mixing(&config, &a),
        Command::FiberValidate(a) => commands::fiber_validate(&config, &a),
        Command::Lyapunov(a) => commands::lyapunov(&config, &a),
        Command::Verify(a) => commands::verify(&config, &a),
    }
}
