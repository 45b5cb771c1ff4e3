//! Noise-injection ablations: five ways of feeding noise to the same
//! generator, each trained as an unconditional GAN on masks and scored by
//! how ellipse-like its samples are.

mod fit;

pub use fit::{connected_components, ellipse_fit_residual, DistributionFitReport, MomentEllipse};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{sample_noise, Interpolation, PreprocessConfig, SamplePair};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::metrics::binarize;
use crate::model::{
    DiscriminatorSpec, Generator, GeneratorSpec, ParameterGroup, PathMode, SkipMode,
};
use crate::plot;
use crate::seed;
use crate::train::{
    run_training, AdamConfig, CyclePolicy, DiscriminatorInput, RunConfig, RunOptions,
    TrainSchedule, TrainState,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    /// Full-resolution noise down the image path.
    #[serde(rename = "A_raw_noise_input")]
    A,
    /// 4x4 noise upsampled, down the image path.
    #[serde(rename = "B_upsampled_low_dim")]
    B,
    /// Full-resolution noise through the noise bottleneck, live skips.
    #[serde(rename = "C_highdim_plus_bottleneck")]
    C,
    /// 4x4 noise through the noise bottleneck, code-injected skips.
    #[serde(rename = "D_lowdim_plus_bottleneck")]
    D,
    /// D with the encoder frozen.
    #[serde(rename = "E_frozen_encoder_plus_D")]
    E,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 5] = [Self::A, Self::B, Self::C, Self::D, Self::E];

    pub fn name(self) -> &'static str {
        match self {
            Self::A => "A_raw_noise_input",
            Self::B => "B_upsampled_low_dim",
            Self::C => "C_highdim_plus_bottleneck",
            Self::D => "D_lowdim_plus_bottleneck",
            Self::E => "E_frozen_encoder_plus_D",
        }
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name() == s || id.name()[..1].eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown scenario `{s}`")))
    }
}

/// Model wiring and training policy of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPreset {
    pub generator: GeneratorSpec,
    pub policy: CyclePolicy,
    pub frozen_groups: Vec<ParameterGroup>,
}

/// Builds the preset for `id` on top of `base`. Every scenario trains only
/// the noise cycle against a mask-only discriminator.
pub fn configure_scenario(id: ScenarioId, base: &GeneratorSpec) -> ScenarioPreset {
    let full = base.input_size;
    let (routing, grid, skip, stop_grad) = match id {
        ScenarioId::A => (PathMode::ImagePath, full, SkipMode::Live, false),
        ScenarioId::B => (PathMode::ImagePath, 4, SkipMode::Live, false),
        ScenarioId::C => (PathMode::NoisePath, full, SkipMode::Live, false),
        ScenarioId::D => (PathMode::NoisePath, 4, SkipMode::InjectCode, false),
        ScenarioId::E => (PathMode::NoisePath, 4, SkipMode::InjectCode, true),
    };
    let generator = GeneratorSpec {
        skip_mode_noise_path: skip,
        stop_encoder_grad: stop_grad,
        ..base.clone()
    };
    let policy = CyclePolicy {
        image_cycle_enabled: false,
        noise_cycle_enabled: true,
        noise_routing: routing,
        noise_grid: grid,
        discriminator_input: DiscriminatorInput::MaskOnly,
        ..CyclePolicy::dynamic()
    };
    let frozen_groups = if id == ScenarioId::E {
        vec![ParameterGroup::Encoder]
    } else {
        Vec::new()
    };
    ScenarioPreset {
        generator,
        policy,
        frozen_groups,
    }
}

/// Shared settings of a scenario run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub generator: GeneratorSpec,
    /// Width and depth of the mask-only discriminator.
    pub discriminator: DiscriminatorSpec,
    /// Training epochs; 0 scores the untrained model.
    pub budget: usize,
    pub lr: f64,
    pub adam: AdamConfig,
    /// Number of generated samples scored.
    pub samples: usize,
    pub interpolation: Interpolation,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn desk() -> Self {
        Self {
            generator: GeneratorSpec::desk(),
            discriminator: DiscriminatorSpec::desk(),
            budget: 30,
            lr: 2e-4,
            adam: AdamConfig::default(),
            samples: 64,
            interpolation: Interpolation::Bilinear,
            seed: 0,
        }
    }

    /// Full training configuration for `id`.
    pub fn run_config(&self, id: ScenarioId) -> RunConfig {
        let preset = configure_scenario(id, &self.generator);
        let size = self.generator.input_size;
        RunConfig {
            discriminator: DiscriminatorSpec {
                input_channels: 1,
                input_size: size,
                ..self.discriminator.clone()
            },
            generator: preset.generator,
            schedule: TrainSchedule::new(self.lr, self.budget.max(1), self.budget.max(1)),
            policy: CyclePolicy {
                noise_interpolation: self.interpolation,
                ..preset.policy
            },
            adam: self.adam,
            preprocess: PreprocessConfig {
                resize_to: size,
                crop_to: size,
            },
            frozen_groups: preset.frozen_groups,
            seed: self.seed,
            ..RunConfig::desk()
        }
    }
}

/// Result of one scenario run. `failure` is set when training diverged,
/// in which case no report is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub scenario: ScenarioId,
    pub interpolation: Interpolation,
    pub budget: usize,
    pub failure: Option<String>,
    pub report: Option<DistributionFitReport>,
}

/// Draws `count` noise inputs for `cfg` and returns the binarized outputs.
pub fn generate_masks(gen: &Generator, cfg: &RunConfig, count: usize) -> Result<Vec<ImageGrid>> {
    let spec = cfg.policy.noise_spec(cfg.generator.input_size);
    (0..count)
        .map(|j| {
            let z = sample_noise(&spec, seed::derive(cfg.seed, &[seed::TAG_SAMPLE, j as u64]))?;
            let x = z.to_tensor(gen.dtype(), gen.device())?;
            let y = gen.forward_t(&x, cfg.policy.noise_routing)?;
            Ok(binarize(&ImageGrid::from_tensor(&y)?, 0.0))
        })
        .collect()
}

/// File stem of a scenario's outputs, e.g. `B_upsampled_low_dim_nearest`.
pub fn output_stem(id: ScenarioId, interpolation: Interpolation) -> String {
    match interpolation {
        Interpolation::Bilinear => id.name().to_string(),
        Interpolation::Nearest => format!("{}_nearest", id.name()),
    }
}

/// Trains scenario `id` on `masks`, samples it and writes
/// `<stem>.json`, `<stem>_samples.png` and the training run under
/// `<stem>_run/` into `out_dir`.
pub fn run_scenario(
    id: ScenarioId,
    masks: &[ImageGrid],
    cfg: &ScenarioConfig,
    out_dir: &Path,
) -> Result<ScenarioOutcome> {
    if masks.is_empty() {
        return Err(Error::config("scenario needs at least one mask"));
    }
    let run_cfg = cfg.run_config(id);
    let stem = output_stem(id, cfg.interpolation);
    let pairs = masks
        .iter()
        .enumerate()
        .map(|(i, m)| SamplePair::new(format!("mask_{i:05}"), m.clone(), m.clone()))
        .collect::<Result<Vec<_>>>()?;
    let trained = if cfg.budget == 0 {
        run_cfg.validate()?;
        let mut s = TrainState::new(
            &run_cfg.generator,
            &run_cfg.discriminator,
            run_cfg.adam,
            run_cfg.schedule.lr0,
            run_cfg.seed,
        )?;
        for &g in &run_cfg.frozen_groups {
            s.models.set_trainable(g, false)?;
        }
        Ok(s)
    } else {
        run_training(&run_cfg, &pairs, &out_dir.join(format!("{stem}_run")), &RunOptions::default())
    };
    let mut outcome = ScenarioOutcome {
        scenario: id,
        interpolation: cfg.interpolation,
        budget: cfg.budget,
        failure: None,
        report: None,
    };
    match trained {
        Ok(state) => {
            let samples = generate_masks(&state.models.generator, &run_cfg, cfg.samples)?;
            outcome.report = Some(DistributionFitReport::from_masks(&samples));
            if !samples.is_empty() {
                let sheet = plot::contact_sheet(&samples, 8, 2)?;
                plot::save_grid_png(&sheet, &out_dir.join(format!("{stem}_samples.png")))?;
            }
        }
        Err(Error::NonFinite(term)) => {
            log::warn!("scenario {id} diverged: non-finite {term}");
            outcome.failure = Some(format!("non-finite loss term `{term}`"));
        }
        Err(e) => return Err(e),
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let json_path: PathBuf = out_dir.join(format!("{stem}.json"));
    fs::write(&json_path, serde_json::to_string_pretty(&outcome)?)
        .map_err(|e| Error::io(&json_path, e))?;
    Ok(outcome)
}
