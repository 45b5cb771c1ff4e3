use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use super::checkpoint::{load_checkpoint_for, save_checkpoint};
use super::policy::CyclePolicy;
use super::schedule::{lr_at, TrainSchedule};
use super::trainer::{train_iteration, TrainState};
use crate::data::{preprocess, sample_noise, PreprocessConfig, SamplePair};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::losses::{LossRow, LossWeights};
use crate::model::{DiscriminatorSpec, GeneratorSpec, ParameterGroup};
use crate::plot;
use crate::seed;

/// Fully resolved configuration of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub generator: GeneratorSpec,
    pub discriminator: DiscriminatorSpec,
    pub schedule: TrainSchedule,
    pub weights: LossWeights,
    pub policy: CyclePolicy,
    pub adam: AdamConfig,
    pub preprocess: PreprocessConfig,
    /// Groups excluded from every update.
    pub frozen_groups: Vec<ParameterGroup>,
    pub seed: u64,
    /// Checkpoint every this many epochs (and always after the last one);
    /// 0 keeps only the final checkpoint.
    pub checkpoint_every: usize,
    /// Sample grids every this many epochs; 0 disables them.
    pub sample_every: usize,
    /// Tiles per sample grid.
    pub sample_count: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorSpec::default(),
            discriminator: DiscriminatorSpec::default(),
            schedule: TrainSchedule::default(),
            weights: LossWeights::default(),
            policy: CyclePolicy::dynamic(),
            adam: AdamConfig::default(),
            preprocess: PreprocessConfig::default(),
            frozen_groups: Vec::new(),
            seed: 0,
            checkpoint_every: 10,
            sample_every: 10,
            sample_count: 4,
        }
    }
}

impl RunConfig {
    /// 64-pixel models on 64-pixel data with a 30-epoch schedule.
    pub fn desk() -> Self {
        Self {
            generator: GeneratorSpec::desk(),
            discriminator: DiscriminatorSpec::desk(),
            schedule: TrainSchedule::new(2e-4, 30, 15),
            preprocess: PreprocessConfig {
                resize_to: 64,
                crop_to: 64,
            },
            checkpoint_every: 0,
            sample_every: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.schedule.validate()?;
        self.weights.validate()?;
        self.adam.validate()?;
        self.preprocess.validate()?;
        self.policy.validate(&self.generator, &self.discriminator)?;
        if self.preprocess.crop_to != self.generator.input_size {
            return Err(Error::config(format!(
                "crop size {} differs from the generator input size {}",
                self.preprocess.crop_to, self.generator.input_size
            )));
        }
        Ok(())
    }
}

/// Where to start and stop.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub resume: Option<PathBuf>,
    /// Stop once this many epochs are complete (the schedule still spans
    /// `total_epochs`).
    pub stop_after_epoch: Option<usize>,
}

/// Paths inside a run directory.
#[derive(Clone, Debug)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn losses(&self) -> PathBuf {
        self.root.join("losses.csv")
    }

    pub fn plot(&self) -> PathBuf {
        self.root.join("losses.png")
    }

    pub fn checkpoint(&self, epoch: usize) -> PathBuf {
        self.root.join("checkpoints").join(format!("epoch_{epoch}.ckpt"))
    }

    pub fn image_samples(&self, epoch: usize) -> PathBuf {
        self.root.join("samples").join(format!("epoch_{epoch}_imagepath.png"))
    }

    pub fn noise_samples(&self, epoch: usize) -> PathBuf {
        self.root.join("samples").join(format!("epoch_{epoch}_noisepath.png"))
    }
}

/// Reads `losses.csv`.
pub fn read_losses(path: &Path) -> Result<Vec<LossRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Index order of `n` samples in `epoch`.
pub fn epoch_order(run_seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::derived_rng(run_seed, &[seed::TAG_SHUFFLE, epoch as u64]));
    order
}

fn write_samples(
    state: &TrainState,
    cfg: &RunConfig,
    train: &[SamplePair],
    layout: &RunLayout,
    epoch: usize,
) -> Result<()> {
    let gen = &state.models.generator;
    let mut tiles = Vec::new();
    for s in train.iter().take(cfg.sample_count) {
        let s = preprocess(s, cfg.preprocess, false, 0)?;
        tiles.push(s.image.channel(0));
        tiles.push(s.mask.clone());
        tiles.push(gen.forward_image(&s.image)?);
    }
    if !tiles.is_empty() {
        plot::save_grid_png(&plot::contact_sheet(&tiles, 3, 2)?, &layout.image_samples(epoch))?;
    }
    let spec = cfg.policy.noise_spec(cfg.generator.input_size);
    let mut tiles = Vec::new();
    for j in 0..cfg.sample_count {
        let z = sample_noise(&spec, seed::derive(cfg.seed, &[seed::TAG_SAMPLE, j as u64]))?;
        let x = z.to_tensor(gen.dtype(), gen.device())?;
        tiles.push(ImageGrid::from_tensor(&gen.forward_t(&x, cfg.policy.noise_routing)?)?);
    }
    if !tiles.is_empty() {
        plot::save_grid_png(&plot::contact_sheet(&tiles, 4, 2)?, &layout.noise_samples(epoch))?;
    }
    Ok(())
}

/// Trains on `train` and writes the run directory. Resuming continues
/// from the checkpoint's epoch with the same derived random streams, so
/// the loss trajectory matches an uninterrupted run.
pub fn run_training(
    cfg: &RunConfig,
    train: &[SamplePair],
    run_dir: &Path,
    opts: &RunOptions,
) -> Result<TrainState> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    let layout = RunLayout::new(run_dir);
    fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    let config_json = serde_json::to_string_pretty(cfg)?;
    fs::write(layout.config(), config_json).map_err(|e| Error::io(layout.config(), e))?;

    let mut state = match &opts.resume {
        Some(path) => {
            let s = load_checkpoint_for(path, &cfg.generator, &cfg.discriminator)?;
            if s.seed != cfg.seed {
                return Err(Error::SpecMismatch(format!(
                    "checkpoint seed {} != configured seed {}",
                    s.seed, cfg.seed
                )));
            }
            s
        }
        None => {
            let mut s = TrainState::new(
                &cfg.generator,
                &cfg.discriminator,
                cfg.adam,
                cfg.schedule.lr0,
                cfg.seed,
            )?;
            for &g in &cfg.frozen_groups {
                s.models.set_trainable(g, false)?;
            }
            s
        }
    };

    let last = opts
        .stop_after_epoch
        .unwrap_or(cfg.schedule.total_epochs)
        .min(cfg.schedule.total_epochs);
    let mut losses = csv::Writer::from_path(layout.losses())?;
    for r in &state.history {
        losses.serialize(r)?;
    }
    while state.epoch < last {
        let epoch = state.epoch;
        state.set_lr(lr_at(epoch, &cfg.schedule)?);
        let order = epoch_order(cfg.seed, epoch, train.len());
        for chunk in order.chunks(cfg.schedule.batch_size) {
            let batch = chunk
                .iter()
                .map(|&i| {
                    let crop_seed = seed::derive(cfg.seed, &[seed::TAG_CROP, epoch as u64, i as u64]);
                    preprocess(&train[i], cfg.preprocess, true, crop_seed)
                })
                .collect::<Result<Vec<_>>>()?;
            train_iteration(&mut state, &batch, &cfg.policy, &cfg.weights)?;
            losses.serialize(state.history.last().expect("row just pushed"))?;
        }
        losses.flush().map_err(|e| Error::io(layout.losses(), e))?;
        state.epoch += 1;
        let k = state.epoch;
        log::info!(
            "epoch {k}/{}: {:?}",
            cfg.schedule.total_epochs,
            state.history.last().map(|r| r.record())
        );
        let every = |n: usize| n > 0 && k % n == 0;
        if every(cfg.checkpoint_every) || k == last {
            save_checkpoint(&state, &layout.checkpoint(k))?;
        }
        if every(cfg.sample_every) || (cfg.sample_every > 0 && k == last) {
            write_samples(&state, cfg, train, &layout, k)?;
        }
    }
    losses.flush().map_err(|e| Error::io(layout.losses(), e))?;
    plot::plot_losses(&state.history, &layout.plot())?;
    Ok(state)
}
