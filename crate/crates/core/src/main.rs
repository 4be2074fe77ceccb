use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use symmfg::cli::{dump_env, inspect, load_environment, render_report, run_experiment, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "symmfg", version, about = "Approximately symmetric N-player games and their mean-field limits")]
struct Cli {
    /// Maximum number of concurrent workers (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run diagnostics on an environment.
    Inspect {
        /// Environment file or experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated checks: alpha-beta, monotonicity, kappa-sparsity, lipschitz, exploitability.
        #[arg(long, value_delimiter = ',', default_value = "alpha-beta,monotonicity")]
        checks: Vec<String>,
        /// Policy file for the exploitability check.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the machine-readable report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Build an environment and print (or write) its drawn description.
    DumpEnv {
        #[arg(long)]
        config: PathBuf,
        /// Override the environment seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let summary = run_experiment(&config, &RunOptions { seed, out })?;
            println!("{}", serde_json::to_string_pretty(&summary.summary).expect("serializable"));
        }
        Command::Inspect {
            config,
            checks,
            policy,
            seed,
            out,
            json,
        } => {
            let env = load_environment(&config, None)?;
            let report = inspect(&env, &checks, policy.as_deref(), seed.unwrap_or(0))?;
            let text = serde_json::to_string_pretty(&report).expect("serializable");
            if let Some(out) = out {
                std::fs::write(out, &text).map_err(|e| CliError::Runtime(e.into()))?;
            }
            if json {
                println!("{text}");
            } else {
                print!("{}", render_report(&report));
            }
        }
        Command::DumpEnv { config, seed, out } => {
            let text = dump_env(&config, seed, out.as_deref())?;
            if out.is_none() {
                print!("{text}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global() {
            eprintln!("runtime error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
