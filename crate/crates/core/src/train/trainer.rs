use candle_core::{DType, Device, Tensor};

use super::adam::{Adam, AdamConfig};
use super::policy::{CyclePolicy, DiscriminatorInput, RealPairSource};
use crate::data::{sample_noise, SamplePair};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::losses::{tensor as lt, LossRecord, LossRow, LossWeights};
use crate::model::{
    Discriminator, DiscriminatorSpec, GanModels, Generator, GeneratorSpec, ParamKey,
    ParameterGroup, PathMode,
};
use crate::seed;

/// Everything a run needs to continue: models, optimizer moments,
/// progress counters and the loss history. Random streams are derived from
/// `seed` and the counters, so no generator state has to be stored.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub models: GanModels,
    pub gen_opt: Adam,
    pub disc_opt: Adam,
    pub seed: u64,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed iterations.
    pub iteration: u64,
    pub history: Vec<LossRow>,
}

impl TrainState {
    /// Fresh `f32` models on the CPU.
    pub fn new(
        gen: &GeneratorSpec,
        disc: &DiscriminatorSpec,
        adam: AdamConfig,
        lr: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::with_dtype(gen, disc, adam, lr, seed, DType::F32)
    }

    pub fn with_dtype(
        gen: &GeneratorSpec,
        disc: &DiscriminatorSpec,
        adam: AdamConfig,
        lr: f64,
        seed: u64,
        dtype: DType,
    ) -> Result<Self> {
        adam.validate()?;
        let device = Device::Cpu;
        Ok(Self {
            models: GanModels::new(
                Generator::new(gen, seed, dtype, &device)?,
                Discriminator::new(disc, seed, dtype, &device)?,
            ),
            gen_opt: Adam::new(adam, lr),
            disc_opt: Adam::new(adam, lr),
            seed,
            epoch: 0,
            iteration: 0,
            history: Vec::new(),
        })
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.gen_opt.lr = lr;
        self.disc_opt.lr = lr;
    }
}

/// Batched tensors for one iteration.
#[derive(Clone, Debug)]
pub struct IterationInputs {
    pub images: Tensor,
    pub masks: Tensor,
    /// Upsampled noise images, one per batch element.
    pub noise: Option<Tensor>,
}

/// Seed of the noise image for batch element `element` of `iteration`.
pub fn noise_seed(run_seed: u64, iteration: u64, element: usize) -> u64 {
    seed::derive(run_seed, &[seed::TAG_NOISE, iteration, element as u64])
}

/// Stacks `batch` and draws fresh noise per element when the noise cycle
/// is on.
pub fn prepare_inputs(
    state: &TrainState,
    batch: &[SamplePair],
    policy: &CyclePolicy,
) -> Result<IterationInputs> {
    if batch.is_empty() {
        return Err(Error::config("empty batch"));
    }
    let gen = &state.models.generator;
    let (dtype, device) = (gen.dtype(), gen.device().clone());
    let images: Vec<&ImageGrid> = batch.iter().map(|s| &s.image).collect();
    let masks: Vec<&ImageGrid> = batch.iter().map(|s| &s.mask).collect();
    let noise = if policy.noise_cycle_enabled {
        let spec = policy.noise_spec(gen.spec().input_size);
        let grids = (0..batch.len())
            .map(|i| sample_noise(&spec, noise_seed(state.seed, state.iteration, i)))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&ImageGrid> = grids.iter().collect();
        Some(ImageGrid::stack(&refs, dtype, &device)?)
    } else {
        None
    };
    Ok(IterationInputs {
        images: ImageGrid::stack(&images, dtype, &device)?,
        masks: ImageGrid::stack(&masks, dtype, &device)?,
        noise,
    })
}

fn finite(term: &str, t: &Tensor) -> Result<f64> {
    let v = lt::scalar(t)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(term.to_string()))
    }
}

fn disc_input(kind: DiscriminatorInput, cond: &Tensor, mask: &Tensor) -> Result<Tensor> {
    Ok(match kind {
        DiscriminatorInput::Conditional => Tensor::cat(&[cond, mask], 1)?,
        DiscriminatorInput::MaskOnly => mask.clone(),
    })
}

fn step_discriminator(state: &mut TrainState, loss: &Tensor) -> Result<()> {
    let grads = loss.backward()?;
    let d = &state.models.discriminator;
    let params = d.parameters();
    if d.is_trainable() {
        state.disc_opt.step(&params, &grads, |_| true)?;
    }
    Ok(())
}

fn step_generator(
    state: &mut TrainState,
    loss: &Tensor,
    groups: &[ParameterGroup],
) -> Result<usize> {
    let grads = loss.backward()?;
    let g = &state.models.generator;
    let params = g.parameters();
    let select = |k: &ParamKey| groups.contains(&k.group) && g.is_trainable(k.group);
    state.gen_opt.step(&params, &grads, select)
}

/// Image cycle, discriminator half. Returns `d_image` and the generator
/// output, which the generator half reuses.
pub fn image_discriminator_step(state: &mut TrainState, x: &IterationInputs) -> Result<(f64, Tensor)> {
    let fake = state.models.generator.forward_t(&x.images, PathMode::ImagePath)?;
    let d = &state.models.discriminator;
    let real = d.forward_t(&Tensor::cat(&[&x.images, &x.masks], 1)?)?;
    let fake_logits = d.forward_t(&Tensor::cat(&[&x.images, &fake.detach()], 1)?)?;
    let loss = lt::discriminator_loss(&real, &fake_logits)?;
    let value = finite("d_image", &loss)?;
    step_discriminator(state, &loss)?;
    Ok((value, fake))
}

/// Image cycle, generator half: `alpha * l1 + beta * adversarial`.
/// Returns `(g_adv_image, l1)`.
pub fn image_generator_step(
    state: &mut TrainState,
    x: &IterationInputs,
    fake: &Tensor,
    w: &LossWeights,
) -> Result<(f64, f64)> {
    let logits = state
        .models
        .discriminator
        .forward_t(&Tensor::cat(&[&x.images, fake], 1)?)?;
    let adv = lt::generator_adversarial_loss(&logits)?;
    let l1 = lt::l1_loss(fake, &x.masks)?;
    let (adv_v, l1_v) = (finite("g_adv_image", &adv)?, finite("l1", &l1)?);
    let total = ((l1 * w.alpha)? + (adv * w.beta)?)?;
    finite("g_total", &total)?;
    step_generator(
        state,
        &total,
        &[ParameterGroup::Encoder, ParameterGroup::Bottleneck, ParameterGroup::Decoder],
    )?;
    Ok((adv_v, l1_v))
}

fn noise_of(x: &IterationInputs) -> Result<&Tensor> {
    x.noise
        .as_ref()
        .ok_or_else(|| Error::config("noise cycle inputs were not prepared"))
}

/// Noise cycle, discriminator half. Returns `d_noise` and the generator
/// output on the noise images.
pub fn noise_discriminator_step(
    state: &mut TrainState,
    x: &IterationInputs,
    policy: &CyclePolicy,
) -> Result<(f64, Tensor)> {
    let z = noise_of(x)?;
    let fake = state.models.generator.forward_t(z, policy.noise_routing)?;
    let real_cond = match policy.noise_real_pair_source {
        RealPairSource::ImageGtPair => &x.images,
        RealPairSource::NoiseGtPair => z,
    };
    let d = &state.models.discriminator;
    let real = d.forward_t(&disc_input(policy.discriminator_input, real_cond, &x.masks)?)?;
    let fake_logits = d.forward_t(&disc_input(policy.discriminator_input, z, &fake.detach())?)?;
    let loss = lt::discriminator_loss(&real, &fake_logits)?;
    let value = finite("d_noise", &loss)?;
    step_discriminator(state, &loss)?;
    Ok((value, fake))
}

/// Generator groups the noise cycle may update.
pub fn noise_cycle_groups(gen: &GeneratorSpec, routing: PathMode) -> Vec<ParameterGroup> {
    match routing {
        PathMode::NoisePath => {
            let mut g = vec![ParameterGroup::Decoder, ParameterGroup::NoiseBottleneck];
            if !gen.stop_encoder_grad {
                g.push(ParameterGroup::Encoder);
            }
            g
        }
        PathMode::ImagePath => vec![
            ParameterGroup::Encoder,
            ParameterGroup::Bottleneck,
            ParameterGroup::Decoder,
        ],
    }
}

/// Noise cycle, generator half: `beta * adversarial`. Returns `g_adv_noise`.
pub fn noise_generator_step(
    state: &mut TrainState,
    x: &IterationInputs,
    fake: &Tensor,
    policy: &CyclePolicy,
    w: &LossWeights,
) -> Result<f64> {
    let z = noise_of(x)?;
    let logits = state
        .models
        .discriminator
        .forward_t(&disc_input(policy.discriminator_input, z, fake)?)?;
    let adv = lt::generator_adversarial_loss(&logits)?;
    let value = finite("g_adv_noise", &adv)?;
    let groups = noise_cycle_groups(state.models.generator.spec(), policy.noise_routing);
    step_generator(state, &(adv * w.beta)?, &groups)?;
    Ok(value)
}

/// One iteration: the image cycle, then the noise cycle, each as a
/// discriminator update followed by a generator update. Disabled cycles
/// report zero losses. The row is appended to the history.
pub fn train_iteration(
    state: &mut TrainState,
    batch: &[SamplePair],
    policy: &CyclePolicy,
    weights: &LossWeights,
) -> Result<LossRecord> {
    policy.validate(
        state.models.generator.spec(),
        state.models.discriminator.spec(),
    )?;
    let inputs = prepare_inputs(state, batch, policy)?;
    let mut rec = LossRecord::default();
    if policy.image_cycle_enabled {
        let (d, fake) = image_discriminator_step(state, &inputs)?;
        let (adv, l1) = image_generator_step(state, &inputs, &fake, weights)?;
        rec.d_image = d;
        rec.g_adv_image = adv;
        rec.l1 = l1;
    }
    if policy.noise_cycle_enabled {
        let (d, fake) = noise_discriminator_step(state, &inputs, policy)?;
        rec.d_noise = d;
        rec.g_adv_noise = noise_generator_step(state, &inputs, &fake, policy, weights)?;
    }
    let rec = rec.with_total(weights);
    if !rec.g_total.is_finite() {
        return Err(Error::NonFinite("g_total".into()));
    }
    state.history.push(LossRow::new(state.iteration, &rec));
    state.iteration += 1;
    Ok(rec)
}
