use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use cocycle_lab::law::{preset_summary, PRESET_NAMES};
use cocycle_lab::orchestrator::{self, ExperimentConfig, SCHEMA_EXAMPLE};

#[derive(Parser)]
#[command(name = "cocycle-lab", version, about = "Random matrix product experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the stages selected in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute verdicts of a finished run from its artifacts.
    Verify {
        /// Run directory or its manifest.json.
        path: PathBuf,
    },
    /// List the built-in laws.
    ListPresets,
    /// Print an annotated example config.
    PrintSchema,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<bool> {
    match Cli::parse().command {
        Command::Run { config, seed, threads, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
            if let Some(n) = threads {
                if n == 0 {
                    bail!("--threads must be positive");
                }
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool")?;
            }
            let manifest = orchestrator::run(&cfg, &dir)?;
            for s in &manifest.stages {
                println!("stage {:<12} {:?} {:.2}s {}", s.name, s.status, s.wall_seconds, s.detail);
            }
            for c in &manifest.checks {
                println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
            }
            println!("digest {}", manifest.output_digest);
            Ok(manifest.all_passed)
        }
        Command::Verify { path } => {
            let report = orchestrator::verify(&path)?;
            for c in &report.checks {
                println!("{} {}", if c.recomputed { "PASS" } else { "FAIL" }, c.name);
            }
            if !report.consistent {
                bail!("recomputed verdicts differ from the manifest");
            }
            Ok(report.all_passed)
        }
        Command::ListPresets => {
            for p in PRESET_NAMES {
                println!("{p:<9} {}", preset_summary(p));
            }
            Ok(true)
        }
        Command::PrintSchema => {
            print!("{SCHEMA_EXAMPLE}");
            Ok(true)
        }
    }
}
