//! `dynpix` command-line driver.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "DYNPIX_OUTPUT_ROOT";

#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<dynpix::Error> for Failure {
    fn from(e: dynpix::Error) -> Self {
        match e {
            dynpix::Error::Config(_) => Failure::Usage(e.into()),
            e => Failure::Runtime(e.into()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "dynpix", version, about = "Dual-cycle Pix2Pix training and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic ellipse dataset.
    Synth(SynthArgs),
    /// Train a generator/discriminator pair.
    Train(TrainArgs),
    /// Score a checkpoint on one split.
    Eval(EvalArgs),
    /// Run the noise-routing scenario lab.
    Scenarios(ScenariosArgs),
    /// Sweep VAE latent sizes on the masks.
    Vae(VaeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $DYNPIX_OUTPUT_ROOT/<command> or runs/<command>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn out_dir(&self, command: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            std::env::var_os(OUTPUT_ROOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs"))
                .join(command)
        })
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise_level: Option<f32>,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Dynamic,
    Pix2pix,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    /// 256-pixel models, 200-epoch schedule.
    Paper,
    /// 64-pixel models, 30-epoch schedule.
    Desk,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "dynamic")]
    pub mode: Mode,
    /// Base defaults the config file and flags apply to.
    #[arg(long, value_enum, default_value = "paper")]
    pub scale: Scale,
    /// Total epochs; without --constant-epochs the first half keeps lr0.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub constant_epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset directory of `<id>.png` / `<id>_mask.png` pairs.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Continue from a checkpoint of the same run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after this many epochs.
    #[arg(long)]
    pub stop_after: Option<usize>,
    /// Resolve and write config.json without training.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<dynpix::data::Split>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label used in the report tables.
    #[arg(long)]
    pub model_tag: Option<String>,
}

#[derive(Args, Debug)]
pub struct ScenariosArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training epochs per scenario; 0 scores untrained models.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Generated samples scored per scenario.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Comma-separated subset, e.g. `A,B,E`.
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<dynpix::scenarios::ScenarioId>>,
    /// Skip the nearest-neighbour rerun of scenario B.
    #[arg(long)]
    pub no_nearest_b: bool,
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VaeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated latent sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub data: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Scenarios(a) => commands::scenarios(a),
        Command::Vae(a) => commands::vae(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Runtime(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
