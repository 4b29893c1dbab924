use std::path::PathBuf;
use std::process::ExitCode;

use casimir_td::cli::{cmd_reference, cmd_run, cmd_weights, exit_code, parse_config, CliOptions};
use clap::{Parser, Subcommand};

/// Time-domain Casimir forces at zero and nonzero temperature.
#[derive(Parser)]
#[command(name = "casimir-td", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for independent simulations and frequency solves.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    /// Omit the timestamp comment line from CSV output.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Also write stress traces and raw responses under <outputs.dir>/dumps.
    #[arg(long, global = true)]
    debug_dumps: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write forces.csv.
    Run { config: PathBuf },
    /// Tabulate the frequency and time weights.
    Weights { config: PathBuf },
    /// Tabulate the imaginary-frequency reference terms.
    Reference { config: PathBuf },
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let opts = CliOptions { jobs: args.jobs as usize, timestamp: !args.no_timestamp, debug_dumps: args.debug_dumps };
    let path = match &args.command {
        Command::Run { config } | Command::Weights { config } | Command::Reference { config } => config,
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(1);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(1);
        }
    };
    let result = match args.command {
        Command::Run { .. } => cmd_run(&cfg, &opts).map(|p| vec![p]),
        Command::Weights { .. } => cmd_weights(&cfg, &opts),
        Command::Reference { .. } => cmd_reference(&cfg, &opts).map(|p| vec![p]),
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
