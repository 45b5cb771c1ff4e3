use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use dynpix::data::{
    binarize_mask, preprocess, resize, write_dataset, Interpolation, PreprocessConfig, Split,
    SynthConfig,
};
use dynpix::metrics::{evaluate_split, export_report};
use dynpix::scenarios::{run_scenario, ScenarioConfig, ScenarioId, ScenarioOutcome};
use dynpix::train::{load_checkpoint, run_training, RunConfig, RunOptions, TrainSchedule};
use dynpix::vae::{sweep_latents, VAEConfig};
use dynpix::ImageGrid;
use serde::{Deserialize, Serialize};

use crate::config::{layered, write_config, DataConfig};
use crate::{EvalArgs, Failure, Mode, Scale, ScenariosArgs, SynthArgs, TrainArgs, VaeArgs};

type Outcome = Result<(), Failure>;

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

fn is_non_empty_dir(path: &Path) -> bool {
    fs::read_dir(path).is_ok_and(|mut d| d.next().is_some())
}

pub fn synth(args: SynthArgs) -> Outcome {
    let mut cfg: SynthConfig = layered(&SynthConfig::default(), args.common.config.as_deref())?;
    cfg.n = args.n.unwrap_or(cfg.n);
    cfg.size = args.size.unwrap_or(cfg.size);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.noise_level = args.noise_level.unwrap_or(cfg.noise_level);
    if cfg.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let out = args.common.out_dir("synth");
    if is_non_empty_dir(&out) && !args.force {
        return Err(usage(format!(
            "output directory {} is not empty; pass --force to overwrite",
            out.display()
        )));
    }
    let samples = cfg.generate()?;
    write_config(&out, &cfg)?;
    write_dataset(&out, &samples)?;
    log::info!("wrote {} pairs to {}", samples.len(), out.display());
    Ok(())
}

/// Resolved configuration of `train`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub data: DataConfig,
    pub run: RunConfig,
}

pub fn resolve_train(args: &TrainArgs) -> Result<TrainConfig, Failure> {
    let run = match args.scale {
        Scale::Paper => RunConfig::default(),
        Scale::Desk => RunConfig::desk(),
    };
    let defaults = TrainConfig {
        data: DataConfig::default(),
        run,
    };
    let mut cfg = layered(&defaults, args.common.config.as_deref())?;
    cfg.data.set_dir(args.data.clone());
    let run = &mut cfg.run;
    run.policy.noise_cycle_enabled = args.mode == Mode::Dynamic;
    if let Some(total) = args.epochs {
        let constant = args.constant_epochs.unwrap_or(total / 2);
        run.schedule = TrainSchedule::new(run.schedule.lr0, total, constant);
    } else if let Some(constant) = args.constant_epochs {
        run.schedule.constant_epochs = constant;
    }
    run.schedule.lr0 = args.lr.unwrap_or(run.schedule.lr0);
    run.seed = args.seed.unwrap_or(run.seed);
    cfg.data.validate()?;
    cfg.run.validate()?;
    Ok(cfg)
}

pub fn train(args: TrainArgs) -> Outcome {
    let cfg = resolve_train(&args)?;
    let out = args.common.out_dir("train");
    write_config(&out, &cfg)?;
    if args.dry_run {
        println!("{}", serde_json::to_string_pretty(&cfg).map_err(anyhow::Error::from)?);
        return Ok(());
    }
    if let Some(ckpt) = &args.resume {
        if !ckpt.is_file() {
            return Err(usage(format!("checkpoint {} does not exist", ckpt.display())));
        }
    }
    let splits = cfg.data.splits()?;
    let split_path = out.join("split.json");
    fs::write(&split_path, serde_json::to_string_pretty(&splits.ids()).map_err(anyhow::Error::from)?)
        .with_context(|| format!("cannot write {}", split_path.display()))?;
    let opts = RunOptions {
        resume: args.resume.clone(),
        stop_after_epoch: args.stop_after,
    };
    let state = run_training(&cfg.run, &splits.train, &out.join("run"), &opts)?;
    log::info!(
        "finished epoch {} after {} iterations; run directory {}",
        state.epoch,
        state.iteration,
        out.join("run").display()
    );
    Ok(())
}

/// Resolved configuration of `eval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub data: DataConfig,
    pub checkpoint: Option<PathBuf>,
    pub split: Split,
    /// Output binarization threshold in `[-1, 1]`.
    pub threshold: f32,
    /// Defaults to resizing straight to the generator's input size.
    pub preprocess: Option<PreprocessConfig>,
    pub model_tag: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            checkpoint: None,
            split: Split::Test,
            threshold: 0.0,
            preprocess: None,
            model_tag: "model".into(),
        }
    }
}

pub fn eval(args: EvalArgs) -> Outcome {
    let mut cfg: EvalConfig = layered(&EvalConfig::default(), args.common.config.as_deref())?;
    cfg.data.set_dir(args.data);
    cfg.checkpoint = args.checkpoint.or(cfg.checkpoint);
    cfg.split = args.split.unwrap_or(cfg.split);
    cfg.model_tag = args.model_tag.unwrap_or(cfg.model_tag);
    cfg.data.validate()?;
    let ckpt = cfg.checkpoint.clone().ok_or_else(|| usage("--checkpoint is required"))?;
    if !ckpt.is_file() {
        return Err(usage(format!("checkpoint {} does not exist", ckpt.display())));
    }
    let state = load_checkpoint(&ckpt)?;
    let gen = &state.models.generator;
    let size = gen.spec().input_size;
    let pre = *cfg.preprocess.get_or_insert(PreprocessConfig {
        resize_to: size,
        crop_to: size,
    });
    if pre.crop_to != size {
        return Err(usage(format!("crop size {} != generator input size {size}", pre.crop_to)));
    }
    let out = args.common.out_dir("eval");
    write_config(&out, &cfg)?;
    let samples = cfg
        .data
        .splits()?
        .get(cfg.split)
        .iter()
        .map(|s| preprocess(s, pre, false, 0))
        .collect::<dynpix::Result<Vec<_>>>()?;
    let report = evaluate_split(gen, &samples, cfg.threshold, &cfg.model_tag, cfg.split)?;
    let files = export_report(&[report.clone()], &out)?;
    println!(
        "{} {:?}: Dice {:.2}% +- {:.2}, JC {:.4} over {} samples ({})",
        report.model,
        report.split,
        100.0 * report.dice.mean,
        100.0 * report.dice.std,
        report.jaccard.mean,
        report.dice.count,
        files.summary_csv.display()
    );
    Ok(())
}

/// Resolved configuration of `scenarios`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenariosConfig {
    /// Scenarios learn the training-split masks.
    pub data: DataConfig,
    pub lab: ScenarioConfig,
    pub scenarios: Vec<ScenarioId>,
    /// Also run scenario B with nearest-neighbour noise upsampling.
    pub nearest_b: bool,
}

impl Default for ScenariosConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            lab: ScenarioConfig::desk(),
            scenarios: ScenarioId::ALL.to_vec(),
            nearest_b: true,
        }
    }
}

#[derive(Serialize)]
struct ScenarioRow {
    scenario: String,
    interpolation: Interpolation,
    budget: usize,
    residual_mean: Option<f64>,
    residual_std: Option<f64>,
    degenerate_fraction: Option<f64>,
    failure: Option<String>,
}

impl From<&ScenarioOutcome> for ScenarioRow {
    fn from(o: &ScenarioOutcome) -> Self {
        Self {
            scenario: o.scenario.name().into(),
            interpolation: o.interpolation,
            budget: o.budget,
            residual_mean: o.report.as_ref().map(|r| r.residual.mean),
            residual_std: o.report.as_ref().map(|r| r.residual.std),
            degenerate_fraction: o.report.as_ref().map(|r| r.degenerate_fraction),
            failure: o.failure.clone(),
        }
    }
}

pub fn scenarios(args: ScenariosArgs) -> Outcome {
    let mut cfg: ScenariosConfig = layered(&ScenariosConfig::default(), args.common.config.as_deref())?;
    cfg.data.set_dir(args.data);
    cfg.lab.budget = args.budget.unwrap_or(cfg.lab.budget);
    cfg.lab.seed = args.seed.unwrap_or(cfg.lab.seed);
    cfg.lab.samples = args.samples.unwrap_or(cfg.lab.samples);
    if let Some(only) = args.only {
        cfg.scenarios = only;
    }
    cfg.nearest_b &= !args.no_nearest_b;
    cfg.data.validate()?;
    if cfg.scenarios.is_empty() {
        return Err(usage("no scenarios selected"));
    }
    for &id in &cfg.scenarios {
        cfg.lab.run_config(id).validate()?;
    }
    let out = args.common.out_dir("scenarios");
    write_config(&out, &cfg)?;
    let masks: Vec<ImageGrid> = cfg.data.splits()?.train.into_iter().map(|s| s.mask).collect();
    let mut runs: Vec<ScenarioConfig> = Vec::new();
    let mut outcomes = Vec::new();
    for &id in &cfg.scenarios {
        runs.push(cfg.lab.clone());
        if id == ScenarioId::B && cfg.nearest_b {
            runs.push(ScenarioConfig {
                interpolation: Interpolation::Nearest,
                ..cfg.lab.clone()
            });
        }
        for lab in runs.drain(..) {
            log::info!("scenario {id} ({:?} noise)", lab.interpolation);
            outcomes.push(run_scenario(id, &masks, &lab, &out)?);
        }
    }
    let path = out.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
    for o in &outcomes {
        w.serialize(ScenarioRow::from(o)).map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;
    for o in &outcomes {
        let row = ScenarioRow::from(o);
        match (row.residual_mean, &row.failure) {
            (Some(m), _) => println!("{} ({:?}): mean residual {m:.3}", row.scenario, row.interpolation),
            (None, Some(f)) => println!("{} ({:?}): failed, {f}", row.scenario, row.interpolation),
            (None, None) => {}
        }
    }
    Ok(())
}

/// Resolved configuration of `vae`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaeCommandConfig {
    /// Every mask of the dataset, all splits.
    pub data: DataConfig,
    pub vae: VAEConfig,
    pub sizes: Vec<usize>,
    pub seed: u64,
}

impl Default for VaeCommandConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            vae: VAEConfig::default(),
            sizes: vec![2, 3, 4, 8, 16, 32],
            seed: 0,
        }
    }
}

pub fn vae(args: VaeArgs) -> Outcome {
    let mut cfg: VaeCommandConfig = layered(&VaeCommandConfig::default(), args.common.config.as_deref())?;
    cfg.data.set_dir(args.data);
    cfg.sizes = args.sizes.unwrap_or(cfg.sizes);
    cfg.vae.epochs = args.epochs.unwrap_or(cfg.vae.epochs);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.data.validate()?;
    cfg.vae.validate()?;
    if cfg.sizes.is_empty() || cfg.sizes.contains(&0) {
        return Err(usage("--sizes needs positive latent sizes"));
    }
    let out = args.common.out_dir("vae");
    write_config(&out, &cfg)?;
    let n = cfg.vae.input_size;
    let masks: Vec<ImageGrid> = cfg
        .data
        .load()?
        .into_iter()
        .map(|s| binarize_mask(&resize(&s.mask, n, n, Interpolation::Nearest)))
        .collect();
    let table = sweep_latents(&masks, &cfg.sizes, &cfg.vae, cfg.seed)?;
    table.write(&out)?;
    print!("{}", table.to_markdown());
    Ok(())
}
