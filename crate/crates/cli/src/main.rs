use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mcx_cli::config::ExperimentConfig;
use mcx_cli::{run_file, Plan, RunError, RunOptions, EXIT_VALIDATION};
use mcx_core::systems::builtin_systems;

#[derive(Parser)]
#[command(name = "mcx", version, about = "Metric complexity and local entropy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment configuration.
    Run {
        config: PathBuf,
        /// Worker threads.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List the built-in systems.
    ListSystems {
        #[arg(long)]
        json: bool,
    },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
}

fn list_systems(json: bool) -> anyhow::Result<()> {
    let rows = builtin_systems();
    if json {
        let v: Vec<_> = rows
            .iter()
            .map(|(name, dim, params)| serde_json::json!({ "name": name, "dimension": dim, "parameters": params }))
            .collect();
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        for (name, dim, params) in rows {
            println!("{name:<16} dim={dim}  {params}");
        }
    }
    Ok(())
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match cli.command {
        Command::Run { config, workers, seed, output } => {
            match run_file(&config, &RunOptions { workers, seed, output }) {
                Ok(report) => {
                    println!("{}", report.dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::ListSystems { json } => match list_systems(json).context("listing systems") {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
        Command::Validate { config } => match ExperimentConfig::load(&config).and_then(|(cfg, _)| Plan::new(&cfg)) {
            Ok(plan) => {
                println!("ok: {} ({})", plan.name, plan.kind.name());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
