use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use noiserise_cli::commands::{self, CliError};

#[derive(Parser)]
#[command(name = "noiserise", version, about = "Uplink scheduling under a noise-rise budget")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scheme and write summary.json plus per-frame CSVs.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config key, e.g. `--set channel.noise_rise_db=7`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run several schemes over a list of noise-rise targets.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Comma-separated targets in dB.
        #[arg(long = "nr-db", value_delimiter = ',', num_args = 0..)]
        nr_db: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "nr,nr_density,fixed")]
        schemes: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Solve one single-cell instance given as JSON and print the result.
    Solve {
        instance: PathBuf,
        /// Include the per-iteration trace.
        #[arg(long)]
        trace: bool,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, overrides, out } => {
            let s = commands::cmd_run(config.as_deref(), &overrides, &out)?;
            eprintln!(
                "{}: {:.4e} bits/cell/frame, ingress std {:.2} dB, {} uncertified, wrote {}",
                s.scheme.name(),
                s.mean_throughput,
                s.ingress_std_db,
                s.uncertified_solves,
                out.display()
            );
        }
        Command::Sweep {
            config,
            overrides,
            nr_db,
            schemes,
            out,
        } => {
            let rows = commands::cmd_sweep(config.as_deref(), &overrides, &nr_db, &schemes, &out)?;
            eprintln!("{} rows written to {}", rows.len(), out.join("sweep.csv").display());
        }
        Command::Solve { instance, trace } => {
            let json = commands::cmd_solve(&instance, trace)?;
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{json}") {
                // a closed pipe downstream is not our failure
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(CliError::Runtime(e.to_string())),
                _ => {}
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
