//! Batch CLI over cohort manifests: synthesize datasets and run the rhythm
//! metrics, device-agreement and chronotype analyses.
//!
//! Progress and log lines go to standard error; data goes to files under
//! the output directory, declared in `run_summary.json`.

mod commands;
mod config;
mod pipeline;
mod summary;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "circadia",
    version,
    about = "Circadian rhythm metrics, chronotype models and device agreement from wearable recordings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Seed override for anything randomized.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
    /// Manifest override (otherwise from the config).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort dataset (CSV files + manifest).
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of participants.
        #[arg(long)]
        n: Option<usize>,
        /// Recording length in days (>= 2).
        #[arg(long)]
        days: Option<u32>,
        /// JSON file with explicit participant profiles.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Rhythm metrics per participant and signal with cohort summaries.
    Metrics {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Per-participant and pooled agreement between two signals.
    Agreement {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "watch_ac")]
        signal_a: String,
        #[arg(long, default_value = "acti_ac")]
        signal_b: String,
    },
    /// MEQ regression models, group comparisons, PCA biplot data.
    Chronotype {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn build_config(common: &CommonArgs) -> anyhow::Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(jobs) = common.jobs {
        config.jobs = jobs;
    }
    if let Some(manifest) = &common.manifest {
        config.manifest = Some(manifest.clone());
    }
    config.validate()?;
    Ok(config)
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Synth {
            common,
            n,
            days,
            profiles,
        } => {
            let mut config = build_config(common)?;
            if let Some(n) = n {
                config.synth_n = *n;
            }
            if let Some(days) = days {
                config.synth.days = *days;
            }
            commands::synth::run(&config, &common.out, profiles.as_deref())
        }
        Command::Metrics { common } => {
            let config = build_config(common)?;
            commands::metrics::run(&config, &common.out)
        }
        Command::Agreement {
            common,
            signal_a,
            signal_b,
        } => {
            let config = build_config(common)?;
            commands::agreement::run(&config, &common.out, signal_a, signal_b)
        }
        Command::Chronotype { common } => {
            let config = build_config(common)?;
            commands::chronotype::run(&config, &common.out)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("[circadia] error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
