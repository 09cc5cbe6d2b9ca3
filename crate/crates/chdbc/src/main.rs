use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chdbc::{commands, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "chdbc", version, about = "Viscous Cahn-Hilliard with dynamic boundary conditions on a periodic strip")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Noise seed, overriding `initial.seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Only log warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate to `time.t_end`; writes diagnostics.csv, final_state.chk, summary.json.
    Simulate,
    /// Solve for a stationary state of mean `stationary.m0`.
    Stationary,
    /// Simulate, then test the endpoint against a stationary state.
    Verify,
    /// Repeat the simulation over `sweep.values`.
    Sweep,
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok(match cli.command {
        Command::Simulate => commands::simulate(&cfg, &out).map(|_| 0)?,
        Command::Stationary => commands::stationary(&cfg, &out).map(|_| 0)?,
        Command::Verify => {
            if commands::verify(&cfg, &out)?.passed() {
                0
            } else {
                1
            }
        }
        Command::Sweep => commands::sweep(&cfg, &out).map(|_| 0)?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
