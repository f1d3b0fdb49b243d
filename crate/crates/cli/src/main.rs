//! Command-line front end: run TOML experiment configs and list the problem
//! catalogue.
//!
//! Exit codes: 0 when the experiment's acceptance gates pass, 1 when the run
//! completes but a gate fails, 2 on configuration or runtime errors.

use std::env;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emweak::builtins::catalogue;
use emweak::experiment::{load_config, run_experiment, write_outputs, PipelineKind};
use emweak::Error;

#[derive(Parser)]
#[command(
    name = "emweak",
    version,
    about = "Monte Carlo weak-approximation toolkit for SDEs with irregular drift"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and print its JSON report to stdout.
    Run {
        /// TOML experiment config file.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's Monte Carlo path count.
        #[arg(long)]
        paths: Option<u64>,
        /// Override the config's pipeline.
        #[arg(long)]
        pipeline: Option<String>,
        /// Directory for report.json and CSV tables (overrides the config's
        /// out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the catalogue of builtin problems.
    ListBuiltins,
}

fn real_main() -> emweak::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::ListBuiltins => {
            for (name, description) in catalogue() {
                println!("{name:<22} {description}");
            }
            Ok(true)
        }
        Command::Run { config, seed, paths, pipeline, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = paths {
                cfg.paths = p;
            }
            if let Some(p) = pipeline {
                cfg.pipeline = p.parse::<PipelineKind>()?;
            }
            if let Ok(w) = env::var("EMWEAK_WORKERS") {
                cfg.workers = w.trim().parse().map_err(|_| {
                    Error::Config(format!("EMWEAK_WORKERS must be a positive integer, got `{w}`"))
                })?;
            }
            cfg.validate()?;
            let output = run_experiment(&cfg)?;
            println!("{}", output.report.to_json()?);
            let out_dir = out.or_else(|| cfg.out_dir.clone().map(PathBuf::from));
            if let Some(dir) = out_dir {
                for path in write_outputs(&output, &dir)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            Ok(output.report.passed)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
