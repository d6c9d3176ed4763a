use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};
use schedlab_cli::run::parse_mode;
use schedlab_cli::{compare, rerun, run_file, RunOptions};

#[derive(Parser)]
#[command(name = "schedlab", version, about = "Downlink scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment mode from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// train, eval, genie-ga, genie-pla or baseline
        #[arg(long)]
        mode: String,
        /// Policy network file (eval, or baseline with scheduler = "drl").
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Evaluate on a cell with this many RBGs.
        #[arg(long)]
        transfer_rbgs: Option<usize>,
        /// Master seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat the run recorded in a manifest.json.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Means and ratios to PF over result CSVs of one setup.
    Compare {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            mode,
            checkpoint,
            transfer_rbgs,
            seed,
            out,
        } => {
            let mode = parse_mode(&mode).ok_or_else(|| {
                anyhow!("unknown mode `{mode}` (expected train, eval, genie-ga, genie-pla or baseline)")
            })?;
            let opts = RunOptions {
                checkpoint,
                transfer_rbgs,
                seed,
                out,
            };
            let m = run_file(&config, mode, &opts)?;
            eprintln!("wrote {} artifacts to {}", m.artifacts.len(), m.config.scenario.output_dir.display());
        }
        Command::Rerun { manifest, out } => {
            let m = rerun(&manifest, out)?;
            eprintln!("wrote {} artifacts to {}", m.artifacts.len(), m.config.scenario.output_dir.display());
        }
        Command::Compare { inputs, out } => {
            let paths: Vec<&std::path::Path> = inputs.iter().map(|p| p.as_path()).collect();
            let bytes = compare(&paths)?.table().to_bytes()?;
            match out {
                Some(p) => std::fs::write(p, bytes)?,
                None => std::io::stdout().write_all(&bytes)?,
            }
        }
    }
    Ok(())
}
