use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hubbard_lab::cli::{config, load_config, run, Command};

#[derive(Parser)]
#[command(
    name = "hubbard-lab",
    version,
    about = "Batch runner for the lattice Hubbard laboratory"
)]
struct Args {
    /// One of: gamma, scatter, phi, eos, filter, dyson-certify, ed, lt-check, trace-check, sweep
    command: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = parse_seed)]
    seed: Option<u64>,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    config::parse_seed(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.command.parse::<Command>().is_err() {
        let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
        eprintln!(
            "unknown command `{}`; expected one of {}",
            args.command,
            names.join(", ")
        );
        return ExitCode::from(2);
    }
    let cfg = match load_config(
        &args.command,
        &args.config,
        args.out,
        args.workers,
        args.seed,
    ) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(record) => {
            for name in &record.outputs {
                println!("{}", cfg.out.join(name).display());
            }
            if record.success() {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} point(s) failed", record.failed_points);
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
