//! Thin batch front-end; all logic lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mmc_tdgl::runner::{cmd_check, cmd_ensemble, cmd_mesh_study, cmd_run, CliOptions};

#[derive(Parser)]
#[command(
    name = "mmc-tdgl",
    version,
    about = "Energy-stable phase-field solver for the MMC-TDGL equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Run configuration file (a manifest is accepted too)
    #[arg(long)]
    config: PathBuf,
    /// Override the seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Suppress progress output
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trajectory
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run an ensemble of independent noise samples and reduce the mean energy
    Ensemble {
        #[command(flatten)]
        common: CommonArgs,
        /// Parallelism degree (defaults to the available cores)
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Repeat a run over a list of grids sharing fine-grid initial data
    MeshStudy {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated grid sizes, square (`32,64,128`) or explicit (`32x16,64x32`)
        #[arg(long)]
        grids: String,
    },
    /// Execute the built-in invariant suite on tiny grids and report
    Check {
        /// Print failures only
        #[arg(long)]
        quiet: bool,
    },
}

fn options(common: CommonArgs, jobs: Option<usize>) -> CliOptions {
    CliOptions {
        config: common.config,
        seed: common.seed,
        output_dir: common.output_dir,
        quiet: common.quiet,
        jobs,
    }
}

fn parse_grids(spec: &str) -> Result<Vec<(usize, usize)>, String> {
    let mut grids = Vec::new();
    for tok in spec.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let (m, n) = match tok.split_once('x') {
            Some((a, b)) => (
                a.parse::<usize>()
                    .map_err(|e| format!("grid `{tok}`: {e}"))?,
                b.parse::<usize>()
                    .map_err(|e| format!("grid `{tok}`: {e}"))?,
            ),
            None => {
                let m = tok
                    .parse::<usize>()
                    .map_err(|e| format!("grid `{tok}`: {e}"))?;
                (m, m)
            }
        };
        grids.push((m, n));
    }
    if grids.is_empty() {
        return Err("no grids given".to_string());
    }
    Ok(grids)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { common } => cmd_run(&options(common, None)).map(|_| ()),
        Command::Ensemble { common, jobs } => cmd_ensemble(&options(common, jobs)).map(|_| ()),
        Command::MeshStudy { common, grids } => match parse_grids(&grids) {
            Ok(g) => cmd_mesh_study(&options(common, None), &g).map(|_| ()),
            Err(msg) => {
                eprintln!("error: config validation error: field `grids`: {msg}");
                return ExitCode::FAILURE;
            }
        },
        Command::Check { quiet } => {
            let opts = CliOptions {
                quiet,
                ..CliOptions::default()
            };
            return if cmd_check(&opts) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
