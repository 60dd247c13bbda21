use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tmle_core::harness::{emit_reports, run_scenario, Scenario, ScenarioConfig};
use tmle_core::Error;

/// Default worker count when `--threads` is absent.
const THREADS_ENV: &str = "TMLE_THREADS";

#[derive(Parser)]
#[command(name = "tmle", version, about = "Total machine learning error simulation workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a scenario file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ExcessFailures { .. } => 3,
        e if e.is_config() => 1,
        _ => 2,
    }
}

fn threads_from_env() -> Result<Option<usize>, Error> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Validate { config } => {
            let scenario = Scenario::load(&config)?;
            println!(
                "{}: ok ({} replicates, seed {})",
                config.display(),
                scenario.config.replicates,
                scenario.config.seed
            );
            Ok(())
        }
        Command::Run {
            config,
            out,
            seed,
            replicates,
            threads,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            let threads = match threads {
                Some(t) => Some(t),
                None => threads_from_env()?,
            };
            let scenario = Scenario::new(cfg)?;
            let report = run_scenario(&scenario, threads)?;
            for path in emit_reports(&report, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
