//! The `edei` command line: dataset synthesis, two-stage training,
//! evaluation sweeps, inference, dataset statistics and figure panels.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod cmd;
pub mod config;
pub mod error;
mod font;
pub mod manifest;
pub mod source;
pub mod viz;

pub use error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "edei", version, about = "Event-guided dual-exposure imaging toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Master seed; overrides `seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Validate inputs and print the plan without writing anything.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize a dataset of exposure samples.
    Synth(SynthArgs),
    /// Train one stage of the network.
    Train(TrainArgs),
    /// Evaluate a checkpoint, optionally sweeping window offset or exposure ratio.
    Eval(EvalArgs),
    /// Run a checkpoint on one sample directory.
    Infer(InferArgs),
    /// Motion, illumination, texture and event-rate statistics of a dataset.
    Stats(StatsArgs),
    /// Side-by-side figure with zoomed insets.
    Viz(VizArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Dataset root to create.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory of PNG frames, or of sequence subdirectories of PNG frames.
    /// Procedural scenes are rendered when absent.
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Validation set; the training set when absent.
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub stage: u8,
    /// Checkpoint directory; receives `stage{n}.ckpt` and `metrics-stage{n}.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
    /// Starting checkpoint. Stage 2 defaults to `<out>/stage1.ckpt`.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sweep {
    /// Deblurring-window offsets in units of the exposure interval.
    Temporal,
    /// Exposure ratios 3 to 11 with the interval held fixed.
    Ratio,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub sweep: Option<Sweep>,
    /// JSON-lines report.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a Markdown table.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// One sample directory.
    #[arg(long)]
    pub sample: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// JSON report.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct VizArgs {
    /// Sample directory holding the inputs and, if present, the ground truth.
    #[arg(long)]
    pub sample: PathBuf,
    /// Directory written by `infer`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Zoom inset `y,x,h,w`; repeatable.
    #[arg(long = "inset", value_name = "Y,X,H,W")]
    pub insets: Vec<viz::Inset>,
    #[command(flatten)]
    pub common: Common,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd::synth::run(&a),
        Command::Train(a) => cmd::train::run(&a),
        Command::Eval(a) => cmd::eval::run(&a),
        Command::Infer(a) => cmd::infer::run(&a),
        Command::Stats(a) => cmd::stats::run(&a),
        Command::Viz(a) => cmd::viz::run(&a),
    }
}
