use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crackpath::cli::{check, run, RunConfig, RunError};

#[derive(Parser)]
#[command(name = "crackpath", about = "Cracking-elements fracture simulation with dissipation-controlled arc length")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write its results.
    Run { config: PathBuf },
    /// Validate a config and its mesh without running.
    Check { config: PathBuf },
    /// Print the version.
    Version,
}

fn execute(command: Command) -> Result<(), RunError> {
    match command {
        Command::Run { config } => {
            let config = RunConfig::load(&config)?;
            let summary = run(&config)?;
            println!(
                "{} steps, lambda {:.6e}, E_cum {:.6e}, stopped by {:?}; results in {}",
                summary.steps,
                summary.lambda,
                summary.e_cum,
                summary.termination,
                summary.output_dir.display()
            );
        }
        Command::Check { config } => {
            let config = RunConfig::load(&config)?;
            let model = check(&config)?;
            println!(
                "ok: {} nodes, {} elements",
                model.mesh.n_nodes(),
                model.mesh.elements.len()
            );
        }
        Command::Version => println!("crackpath {}", env!("CARGO_PKG_VERSION")),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Args::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("crackpath: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
