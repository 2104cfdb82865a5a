use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod dynamics;
mod error;
mod simulate;
mod verify;

use error::CliError;

#[derive(Parser)]
#[command(name = "wbc", version, about = "Whole-body control toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a controller against the simulator as described by a TOML file.
    Simulate {
        config: PathBuf,
        /// Print the resolved configuration instead of running it.
        #[arg(long)]
        print_config: bool,
    },
    /// Print M, G, C ν + G and optionally a frame Jacobian as CSV blocks.
    Dynamics {
        model: PathBuf,
        /// Joint positions in canonical order (default: neutral).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        q: Option<Vec<f64>>,
        /// Joint velocities in canonical order (default: zero).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        nu: Option<Vec<f64>>,
        #[arg(long)]
        frame: Option<String>,
        #[arg(long)]
        zero_gravity: bool,
        /// Treat the root link as a free-floating base at the origin, at rest.
        #[arg(long)]
        floating: bool,
    },
    /// Check dynamics invariants on the bundled fixtures.
    Verify {
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Simulate { config, print_config } => simulate::command(&config, print_config, &mut out),
        Command::Dynamics { model, q, nu, frame, zero_gravity, floating } => {
            let request = dynamics::Request { model, q, nu, frame, zero_gravity, floating };
            dynamics::command(&request, &mut out)
        }
        Command::Verify { seed } => verify::command(seed, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
