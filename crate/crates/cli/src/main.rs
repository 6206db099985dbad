//! `ssct`: synthetic data, transforms, wave-vector estimation and mode
//! decomposition from the command line.
//!
//! Exit status is 0 on success, 2 for invalid input or configuration and 3
//! for a numerical failure detected during the run.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use ssct::SsctError;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "ssct", version, about = "Synchrosqueezed curvelet transform")]
struct Cli {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default ssct-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for noise and disruption, replacing the preset's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct Source {
    /// Built-in preset name or preset JSON file.
    #[arg(long)]
    preset: Option<String>,
    /// SSCT raw input field.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Noise level in dB for the preset; `inf` for noiseless.
    #[arg(long, allow_negative_numbers = true)]
    snr: Option<f64>,
}

#[derive(Args, Clone, Default)]
pub struct Analysis {
    /// Wave-packet geometry s = t = 5/8 instead of curvelets.
    #[arg(long)]
    wave_packet: bool,
    /// Treat the input as real-valued and keep half of the tiles.
    #[arg(long)]
    real: bool,
    /// Coefficient threshold on |W|^2.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Squeeze mass threshold.
    #[arg(long)]
    delta: Option<f64>,
    /// Position grid side.
    #[arg(long)]
    lb: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a preset field, its components and ground truth.
    Synth {
        #[command(flatten)]
        source: Source,
    },
    /// Forward transform: tiling summary, coefficient dump, frame energy.
    Forward {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        analysis: Analysis,
    },
    /// Mean local wave-vectors and, given a truth, their relative error.
    Estimate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        analysis: Analysis,
        /// Ground-truth wave-vectors as b1,b2,v1,v2 CSV.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Cluster the squeezed energy and reconstruct one field per mode.
    Decompose {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        analysis: Analysis,
        /// Keep at most this many modes.
        #[arg(long)]
        max_modes: Option<usize>,
    },
    /// Compare curvelet and wave-packet wave-vector errors on one input.
    Bench {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        analysis: Analysis,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Error of the mean wave-vector over noise levels and thresholds.
    SnrSweep {
        #[command(flatten)]
        source: Source,
        /// Comma-separated noise levels in dB (`inf` for noiseless).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        snr_list: Option<Vec<f64>>,
        /// Comma-separated thresholds, one per noise level.
        #[arg(long, value_delimiter = ',')]
        delta_list: Option<Vec<f64>>,
        /// Comma-separated noise seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<SsctError>(), Some(SsctError::Numerical(_))));
    if numerical {
        3
    } else {
        2
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    let threads = cfg
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cfg.validate()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()?;
    let quiet = cli.quiet;
    match cli.command {
        Command::Synth { source } => commands::synth(cfg.with_source(&source)?, quiet),
        Command::Forward { source, analysis } => {
            commands::forward(cfg.with_source(&source)?, &analysis, quiet)
        }
        Command::Estimate {
            source,
            analysis,
            truth,
        } => {
            let mut cfg = cfg.with_source(&source)?;
            if truth.is_some() {
                cfg.truth = truth;
            }
            commands::estimate(cfg, &analysis, quiet)
        }
        Command::Decompose {
            source,
            analysis,
            max_modes,
        } => commands::decompose(cfg.with_source(&source)?, &analysis, max_modes, quiet),
        Command::Bench {
            source,
            analysis,
            truth,
        } => {
            let mut cfg = cfg.with_source(&source)?;
            if truth.is_some() {
                cfg.truth = truth;
            }
            commands::bench(cfg, &analysis, quiet)
        }
        Command::SnrSweep {
            source,
            snr_list,
            delta_list,
            seeds,
        } => {
            let mut cfg = cfg.with_source(&source)?;
            let mut sweep = cfg.sweep.clone().unwrap_or_default();
            if let Some(s) = snr_list {
                sweep.snr_db = s
                    .into_iter()
                    .map(|v| Some(v).filter(|v| v.is_finite()))
                    .collect();
            }
            if let Some(d) = delta_list {
                sweep.delta = d;
            }
            if let Some(s) = seeds {
                sweep.seeds = s;
            }
            cfg.sweep = Some(sweep);
            cfg.validate()?;
            commands::snr_sweep(cfg, quiet)
        }
    }
}

impl RunConfig {
    fn with_source(mut self, source: &Source) -> Result<Self> {
        if source.preset.is_some() {
            self.preset = source.preset.clone();
            self.input = None;
        }
        if source.input.is_some() {
            self.input = source.input.clone();
            self.preset = None;
        }
        if source.snr.is_some() {
            self.snr_db = source.snr;
        }
        self.validate()?;
        Ok(self)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
