use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pullwave_cli::{exit_code, execute, load_config, Command, EXIT_INVALID};

#[derive(Parser)]
#[command(name = "pullwave", version, about = "Pathwise stochastic wave equation runs")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ConfigArg {
    /// Configuration file.
    #[arg(value_name = "CONFIG", required_unless_present = "config")]
    path: Option<PathBuf>,

    #[arg(long, value_name = "PATH", conflicts_with = "path")]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn resolve(&self) -> PathBuf {
        self.config.clone().or_else(|| self.path.clone()).expect("clap enforces one of the two")
    }
}

#[derive(Subcommand)]
enum Sub {
    /// Ergodic averages and Ω_m membership over a range of seeds.
    OuCheck(ConfigArg),
    /// One trajectory with energy audits.
    Simulate(ConfigArg),
    /// Energy-audit residuals under time-step halving.
    EnergyAudit(ConfigArg),
    /// Absorbing radius and entry-lag search.
    Absorb(ConfigArg),
    /// Pullback-attractor estimate over the lag schedule.
    Pullback(ConfigArg),
    /// Tail mass as a function of the cut-off radius.
    Tails(ConfigArg),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, arg) = match &cli.command {
        Sub::OuCheck(a) => (Command::OuCheck, a),
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::EnergyAudit(a) => (Command::EnergyAudit, a),
        Sub::Absorb(a) => (Command::Absorb, a),
        Sub::Pullback(a) => (Command::Pullback, a),
        Sub::Tails(a) => (Command::Tails, a),
    };

    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID as u8);
        }
    }
    let threads = rayon::current_num_threads();

    let cfg = match load_config(&arg.resolve(), cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID as u8);
        }
    };
    let result = execute(command, &cfg, cli.out.as_deref(), threads);
    match &result {
        Ok(o) => {
            if let Some(reason) = &o.failure {
                eprintln!("numerical failure: {reason}");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
