use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ss2s::config::ExperimentConfig;
use ss2s::pipeline::{self, Experiment};
use ss2s_core::timeseries::SynthSpec;

#[derive(Parser)]
#[command(
    name = "ss2s",
    version,
    about = "Routine discovery with siamese sequence-to-sequence metric learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Results directory; overrides the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; run `r` uses `seed + r`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset: recording CSV, sidecar, labels and a config.
    Synth {
        /// Synthetic spec (JSON); the built-in default when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train, cluster and score the learned metric.
    Run(RunArgs),
    /// Cluster and score with the DTW baseline.
    BaselineDtw(RunArgs),
    /// Aggregate results directories into one table with Welch's tests.
    Report {
        #[arg(long)]
        out: PathBuf,
        /// Results directories to aggregate.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

fn run(args: RunArgs, kind: Experiment) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.runs {
        cfg.runs = r;
    }
    if let Some(o) = args.out {
        cfg.out = Some(o);
    }
    let out = cfg
        .out
        .clone()
        .context("no results directory: pass --out or set `out` in the config")?;
    let manifest = pipeline::execute(&cfg, kind, &out, args.jobs)?;
    println!("wrote {} files to {}", manifest.files.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config, out, seed } => (|| {
            let mut spec = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<SynthSpec>(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => SynthSpec::default(),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            let files = pipeline::write_synth(&spec, &out).context("stage `synth` failed")?;
            println!("wrote {} files to {}", files.len(), out.display());
            Ok(())
        })(),
        Command::Run(args) => run(args, Experiment::Learned),
        Command::BaselineDtw(args) => run(args, Experiment::DtwBaseline),
        Command::Report { out, dirs } => pipeline::report(&dirs, &out).context("stage `report` failed"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
