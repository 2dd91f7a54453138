//! `jamwatch`: spot RF jamming in raw I/Q captures with an
//! attention-enhanced LSTM autoencoder.
//!
//! The pipeline runs as five subcommands: `generate` synthesizes a labeled
//! capture, `train` fits the autoencoder on its normal windows and
//! calibrates a detection threshold, `detect` scores a capture against a
//! checkpoint, `evaluate` prints metrics for a labeled report, and `plot`
//! renders the report as CSV + SVG.
//!
//! Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or config
//! error. Every random choice flows from the explicit `--seed` flags, so
//! reruns are byte-identical (manifest timestamps and epoch wall-clock
//! aside).

mod commands;
mod config;
mod manifest;
mod plot;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use jamwatch_core::Error;

use commands::{Ctx, PlotKind};

#[derive(Parser)]
#[command(name = "jamwatch", version, about = "Jamming detection on I/Q streams")]
struct Cli {
    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a labeled I/Q capture from a scenario config.
    Generate {
        /// Scenario config (TOML or JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Master seed for symbols, noise and jammers.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the autoencoder on the normal windows of a capture.
    Train {
        /// Input I/Q file (f32 little-endian interleaved pairs).
        #[arg(long)]
        data: PathBuf,
        /// Model/training config (TOML or JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for checkpoint and calibration artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Seed for initialization, shuffling and corruption.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample rate metadata when the config does not set one.
        #[arg(long)]
        sample_rate: Option<f64>,
    },
    /// Score a capture against a trained checkpoint.
    Detect {
        /// Input I/Q file.
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Threshold: a number, or a threshold.json written by `train`.
        #[arg(long)]
        threshold: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Window stride; defaults to the model sequence length.
        #[arg(long)]
        stride: Option<usize>,
        /// Window index to capture for overlay plots; defaults to the
        /// first window classified normal.
        #[arg(long)]
        overlay_window: Option<usize>,
        /// Sample rate metadata.
        #[arg(long, default_value_t = 1e6)]
        sample_rate: f64,
    },
    /// Print metrics of a labeled report.
    Evaluate {
        /// report.json written by `detect`.
        #[arg(long)]
        report: PathBuf,
    },
    /// Render a report as CSV + SVG.
    Plot {
        /// report.json written by `detect`.
        #[arg(long)]
        report: PathBuf,
        /// Which figure to emit.
        #[arg(long, value_enum)]
        kind: PlotArg,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotArg {
    ErrorTrace,
    Histogram,
    Overlay,
}

impl From<PlotArg> for PlotKind {
    fn from(v: PlotArg) -> Self {
        match v {
            PlotArg::ErrorTrace => PlotKind::ErrorTrace,
            PlotArg::Histogram => PlotKind::Histogram,
            PlotArg::Overlay => PlotKind::Overlay,
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Argument(_) | Error::Config(_) | Error::Format(_) | Error::Version { .. } => 2,
        Error::Shape(_) | Error::Numeric(_) | Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { quiet: cli.quiet };

    let result = match &cli.command {
        Command::Generate { config, out, seed } => commands::cmd_generate(&ctx, config, out, *seed),
        Command::Train {
            data,
            config,
            out,
            seed,
            sample_rate,
        } => commands::cmd_train(&ctx, data, config, out, *seed, *sample_rate),
        Command::Detect {
            data,
            checkpoint,
            threshold,
            out,
            stride,
            overlay_window,
            sample_rate,
        } => commands::cmd_detect(
            &ctx,
            data,
            checkpoint,
            threshold,
            out,
            *stride,
            *overlay_window,
            *sample_rate,
        ),
        Command::Evaluate { report } => commands::cmd_evaluate(report),
        Command::Plot { report, kind, out } => {
            commands::cmd_plot(&ctx, report, (*kind).into(), out)
        }
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
