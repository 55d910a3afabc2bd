mod cli;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use sipsgraph::theory::{CheckOptions, Prop1Config};

use cli::commands::{cmd_check, cmd_eval, cmd_generate, cmd_train};
use cli::config::{Overrides, RunConfig};

/// Graph embedding with shifted inner-product similarity.
#[derive(Parser)]
#[command(name = "sipsgraph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per seed and write metrics, checkpoints and embeddings.
    Train {
        #[command(flatten)]
        run: Overrides,
    },
    /// Score a checkpoint under the configured protocol.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Seed whose split to evaluate on (default: first configured seed).
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        run: Overrides,
    },
    /// Write a synthetic graph to a file.
    Generate {
        /// Output graph file.
        #[arg(long = "output", short = 'o')]
        output: PathBuf,
        #[command(flatten)]
        run: Overrides,
    },
    /// Run the numerical theory checks; exit status 1 if any fails.
    Check {
        /// Run only these checks (comma-separated).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long = "M", default_value_t = 1.0)]
        half_width: f64,
        #[arg(long = "K", default_value_t = 4)]
        dim: usize,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        mc_samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { run } => {
            let results = cmd_train(RunConfig::from_overrides(&run)?)?;
            for r in results {
                println!("seed {}: auc_test {:.4}", r.seed, r.auc_test);
            }
        }
        Command::Eval { checkpoint, seed, run } => {
            println!("{}", cmd_eval(RunConfig::from_overrides(&run)?, &checkpoint, seed)?);
        }
        Command::Generate { output, run } => {
            let g = cmd_generate(RunConfig::from_overrides(&run)?, &output)?;
            println!("wrote {} nodes, {} pairs to {}", g.n(), g.edge_count(), output.display());
        }
        Command::Check { only, p, half_width, dim, iterations, mc_samples, seed } => {
            let defaults = Prop1Config::default();
            let prop1 = Prop1Config {
                p,
                half_width,
                dim,
                iterations: iterations.unwrap_or(defaults.iterations),
                mc_samples: mc_samples.unwrap_or(defaults.mc_samples),
                seed,
                ..defaults
            };
            let opts = CheckOptions { prop1, seed, ..Default::default() };
            let failed = cmd_check(&opts, &only, |line| println!("{line}"))?;
            if !failed.is_empty() {
                eprintln!("failed checks: {}", failed.join(", "));
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
