//! Convolutional VAE over masks, used to probe how many latent dimensions
//! a mask distribution needs.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use candle_core::{DType, Device, Tensor, Var};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::losses::tensor::scalar;
use crate::metrics::{binarize, dice};
use crate::model::layers::{self, Conv2d, ConvShape, Linear};
use crate::seed;
use crate::train::{Adam, AdamConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VAEConfig {
    pub latent_size: usize,
    pub input_size: usize,
    /// Strided stages in the encoder, mirrored by the decoder.
    pub depth: usize,
    pub base_width: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub kl_weight: f64,
}

impl Default for VAEConfig {
    fn default() -> Self {
        Self {
            latent_size: 4,
            input_size: 64,
            depth: 4,
            base_width: 16,
            epochs: 50,
            batch_size: 16,
            lr: 1e-3,
            kl_weight: 1.0,
        }
    }
}

impl VAEConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_size == 0 {
            return Err(Error::config("latent_size must be at least 1"));
        }
        if self.depth == 0 || self.input_size % (1 << self.depth) != 0 {
            return Err(Error::config(format!(
                "input size {} is not divisible by 2^{}",
                self.input_size, self.depth
            )));
        }
        if self.base_width == 0 || self.batch_size == 0 {
            return Err(Error::config("base_width and batch_size must be positive"));
        }
        if !(self.lr > 0.0 && self.kl_weight >= 0.0) {
            return Err(Error::config("lr must be positive and kl_weight non-negative"));
        }
        Ok(())
    }

    fn width(&self, k: usize) -> usize {
        self.base_width * (1 << (k - 1)).min(4)
    }

    fn deep_size(&self) -> usize {
        self.input_size >> self.depth
    }
}

#[derive(Clone, Debug)]
pub struct Vae {
    cfg: VAEConfig,
    encoder: Vec<Conv2d>,
    to_stats: Linear,
    from_latent: Linear,
    /// Deepest stage first; the last one emits logits.
    decoder: Vec<Conv2d>,
}

impl Vae {
    pub fn new(cfg: &VAEConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let (dtype, device) = (DType::F32, Device::Cpu);
        let mut rng = seed::derived_rng(seed, &[seed::TAG_VAE, 0]);
        let d = cfg.depth;
        let mut encoder = Vec::with_capacity(d);
        let mut prev = 1;
        for k in 1..=d {
            let shape = ConvShape {
                in_channels: prev,
                out_channels: cfg.width(k),
                kernel: 4,
                stride: 2,
                padding: 1,
            };
            encoder.push(Conv2d::new(&mut rng, shape, layers::leaky_gain(), dtype, &device)?);
            prev = cfg.width(k);
        }
        let flat = cfg.width(d) * cfg.deep_size() * cfg.deep_size();
        let to_stats = Linear::new(&mut rng, flat, 2 * cfg.latent_size, 1.0, dtype, &device)?;
        let from_latent = Linear::new(&mut rng, cfg.latent_size, flat, layers::relu_gain(), dtype, &device)?;
        let mut decoder = Vec::with_capacity(d);
        for k in (1..=d).rev() {
            let (out, gain) = if k > 1 {
                (cfg.width(k - 1), layers::relu_gain())
            } else {
                (1, 1.0)
            };
            let shape = ConvShape {
                in_channels: cfg.width(k),
                out_channels: out,
                kernel: 3,
                stride: 1,
                padding: 1,
            };
            decoder.push(Conv2d::new(&mut rng, shape, gain, dtype, &device)?);
        }
        Ok(Self {
            cfg: cfg.clone(),
            encoder,
            to_stats,
            from_latent,
            decoder,
        })
    }

    pub fn config(&self) -> &VAEConfig {
        &self.cfg
    }

    pub fn vars(&self) -> Vec<(String, &Var)> {
        let mut out = Vec::new();
        for (i, c) in self.encoder.iter().enumerate() {
            out.push((format!("encoder.{i}.weight"), &c.weight));
            out.push((format!("encoder.{i}.bias"), &c.bias));
        }
        out.push(("to_stats.weight".into(), &self.to_stats.weight));
        out.push(("to_stats.bias".into(), &self.to_stats.bias));
        out.push(("from_latent.weight".into(), &self.from_latent.weight));
        out.push(("from_latent.bias".into(), &self.from_latent.bias));
        for (i, c) in self.decoder.iter().enumerate() {
            out.push((format!("decoder.{i}.weight"), &c.weight));
            out.push((format!("decoder.{i}.bias"), &c.bias));
        }
        out
    }

    /// Posterior mean and log-variance, each `(N, latent_size)`.
    pub fn encode(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut h = x.clone();
        for c in &self.encoder {
            h = layers::leaky_relu(&c.forward(&h)?)?;
        }
        let stats = self.to_stats.forward(&h.flatten_from(1)?)?;
        let l = self.cfg.latent_size;
        Ok((stats.narrow(1, 0, l)?, stats.narrow(1, l, l)?))
    }

    /// Pixel logits `(N, 1, S, S)` for latents `(N, latent_size)`.
    pub fn decode(&self, z: &Tensor) -> Result<Tensor> {
        let n = z.dim(0)?;
        let (w, s) = (self.cfg.width(self.cfg.depth), self.cfg.deep_size());
        let mut h = self.from_latent.forward(z)?.relu()?.reshape((n, w, s, s))?;
        let last = self.decoder.len() - 1;
        for (i, c) in self.decoder.iter().enumerate() {
            let size = h.dim(2)? * 2;
            h = c.forward(&h.upsample_nearest2d(size, size)?)?;
            if i < last {
                h = h.relu()?;
            }
        }
        Ok(h)
    }
}

/// Reconstructs a mask in `[-1, 1]`.
pub trait Reconstructor {
    fn reconstruct(&self, mask: &ImageGrid) -> Result<ImageGrid>;
}

impl Reconstructor for Vae {
    /// Decodes the posterior mean; `2 * sigmoid(logit) - 1 = tanh(logit / 2)`.
    fn reconstruct(&self, mask: &ImageGrid) -> Result<ImageGrid> {
        let x = mask.to_tensor(DType::F32, &Device::Cpu)?;
        let (mu, _) = self.encode(&x)?;
        let y = (self.decode(&mu)? * 0.5)?.tanh()?;
        ImageGrid::from_tensor(&y)
    }
}

impl<F> Reconstructor for F
where
    F: Fn(&ImageGrid) -> Result<ImageGrid>,
{
    fn reconstruct(&self, mask: &ImageGrid) -> Result<ImageGrid> {
        self(mask)
    }
}

/// `KL(N(mu, exp(logvar)) || N(0, 1))` summed over latents, averaged over
/// the batch.
pub fn kl_divergence(mu: &Tensor, logvar: &Tensor) -> Result<Tensor> {
    let n = mu.dim(0)? as f64;
    let inner = ((logvar + 1.0)? - mu.sqr()?)? - logvar.exp()?;
    Ok((inner?.sum_all()? * (-0.5 / n))?)
}

/// Pixel binary cross-entropy of `logits` against `targets` in `{0, 1}`,
/// summed over pixels and averaged over the batch.
pub fn bce_with_logits(logits: &Tensor, targets: &Tensor) -> Result<Tensor> {
    let n = logits.dim(0)? as f64;
    // max(x, 0) - x t + log(1 + exp(-|x|))
    let soft = (logits.abs()?.neg()?.exp()? + 1.0)?.log()?;
    let loss = ((logits.relu()? - (logits * targets)?)? + soft)?;
    Ok((loss.sum_all()? / n)?)
}

/// Mean losses of one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeEpoch {
    pub reconstruction: f64,
    pub kl: f64,
}

#[derive(Clone, Debug)]
pub struct TrainedVae {
    pub vae: Vae,
    pub history: Vec<VaeEpoch>,
}

fn gaussian(rng: &mut impl Rng, shape: (usize, usize)) -> Result<Tensor> {
    let v: Vec<f32> = (0..shape.0 * shape.1)
        .map(|_| rng.sample::<f32, _>(StandardNormal))
        .collect();
    Ok(Tensor::from_vec(v, shape, &Device::Cpu)?)
}

/// Trains on reconstruction BCE plus `kl_weight` times the KL term.
pub fn train_vae(masks: &[ImageGrid], cfg: &VAEConfig, seed: u64) -> Result<TrainedVae> {
    if masks.is_empty() {
        return Err(Error::config("VAE training needs at least one mask"));
    }
    if let Some(bad) = masks
        .iter()
        .find(|m| m.shape() != (1, cfg.input_size, cfg.input_size))
    {
        return Err(Error::shape(format!(
            "VAE expects 1x{0}x{0} masks, got {1:?}",
            cfg.input_size,
            bad.shape()
        )));
    }
    let vae = Vae::new(cfg, seed)?;
    let mut opt: Adam<String> = Adam::new(
        AdamConfig {
            beta1: 0.9,
            ..AdamConfig::default()
        },
        cfg.lr,
    );
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..masks.len()).collect();
        order.shuffle(&mut seed::derived_rng(seed, &[seed::TAG_VAE, 1, epoch as u64]));
        let mut eps_rng = seed::derived_rng(seed, &[seed::TAG_VAE, 2, epoch as u64]);
        let (mut rec_sum, mut kl_sum) = (0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let grids: Vec<&ImageGrid> = chunk.iter().map(|&i| &masks[i]).collect();
            let x = ImageGrid::stack(&grids, DType::F32, &Device::Cpu)?;
            let targets = ((&x + 1.0)? * 0.5)?.clamp(0.0, 1.0)?;
            let (mu, logvar) = vae.encode(&x)?;
            let eps = gaussian(&mut eps_rng, (chunk.len(), cfg.latent_size))?;
            let z = (&mu + ((&logvar * 0.5)?.exp()? * eps)?)?;
            let rec = bce_with_logits(&vae.decode(&z)?, &targets)?;
            let kl = kl_divergence(&mu, &logvar)?;
            let loss = (&rec + (&kl * cfg.kl_weight)?)?;
            let (r, k) = (scalar(&rec)?, scalar(&kl)?);
            if !r.is_finite() || !k.is_finite() {
                return Err(Error::NonFinite(format!(
                    "VAE loss at epoch {epoch} (reconstruction {r}, kl {k})"
                )));
            }
            let grads = loss.backward()?;
            opt.step_vars(vae.vars(), &grads)?;
            rec_sum += r * chunk.len() as f64;
            kl_sum += k * chunk.len() as f64;
        }
        let n = masks.len() as f64;
        history.push(VaeEpoch {
            reconstruction: rec_sum / n,
            kl: kl_sum / n,
        });
    }
    Ok(TrainedVae { vae, history })
}

/// Mean Dice between each mask and its reconstruction binarized at
/// `threshold`.
pub fn reconstruction_dice(
    model: &impl Reconstructor,
    masks: &[ImageGrid],
    threshold: f32,
) -> Result<f64> {
    if masks.is_empty() {
        return Err(Error::config("no masks to reconstruct"));
    }
    let mut total = 0.0;
    for m in masks {
        let rec = binarize(&model.reconstruct(m)?, threshold);
        total += dice(&rec, m)?;
    }
    Ok(total / masks.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub latent_size: usize,
    pub dice: Option<f64>,
    pub error: Option<String>,
}

/// Reconstruction Dice per latent size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityTable {
    pub rows: Vec<CapacityRow>,
    pub warnings: Vec<String>,
}

impl CapacityTable {
    pub fn dice(&self, latent_size: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.latent_size == latent_size)
            .and_then(|r| r.dice)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Latent size | Dice (%) |\n|---|---|\n");
        for r in &self.rows {
            let cell = match (r.dice, &r.error) {
                (Some(d), _) => format!("{:.2}", 100.0 * d),
                (None, Some(e)) => format!("failed: {e}"),
                (None, None) => "-".into(),
            };
            s.push_str(&format!("| {} | {cell} |\n", r.latent_size));
        }
        s
    }

    /// Writes `capacity.csv` and `capacity.md` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("capacity.csv");
        let mut w = csv::Writer::from_path(&csv_path)?;
        w.write_record(["latent_size", "dice", "error"])?;
        for r in &self.rows {
            w.write_record([
                r.latent_size.to_string(),
                r.dice.map(|d| d.to_string()).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&csv_path, e))?;
        let md = dir.join("capacity.md");
        fs::write(&md, self.to_markdown()).map_err(|e| Error::io(&md, e))
    }
}

/// Trains one VAE per distinct size (first occurrence order) with a seed
/// derived from `seed` and the size. A failing size is recorded and the
/// sweep goes on.
pub fn sweep_latents(
    masks: &[ImageGrid],
    sizes: &[usize],
    base: &VAEConfig,
    seed: u64,
) -> Result<CapacityTable> {
    if sizes.is_empty() {
        return Err(Error::config("no latent sizes to sweep"));
    }
    let mut seen = BTreeSet::new();
    let mut table = CapacityTable {
        rows: Vec::new(),
        warnings: Vec::new(),
    };
    for &size in sizes {
        if !seen.insert(size) {
            let msg = format!("latent size {size} listed more than once; keeping one row");
            log::warn!("{msg}");
            table.warnings.push(msg);
            continue;
        }
        let cfg = VAEConfig {
            latent_size: size,
            ..base.clone()
        };
        let size_seed = seed::derive(seed, &[seed::TAG_VAE, size as u64]);
        let result = train_vae(masks, &cfg, size_seed)
            .and_then(|t| reconstruction_dice(&t.vae, masks, 0.0));
        table.rows.push(match result {
            Ok(d) => CapacityRow {
                latent_size: size,
                dice: Some(d),
                error: None,
            },
            Err(e) => {
                log::warn!("latent size {size} failed: {e}");
                CapacityRow {
                    latent_size: size,
                    dice: None,
                    error: Some(e.to_string()),
                }
            }
        });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_is_zero_at_the_prior() {
        let z = Tensor::zeros((3, 5), DType::F64, &Device::Cpu).unwrap();
        assert_eq!(scalar(&kl_divergence(&z, &z).unwrap()).unwrap(), 0.0);
        let mu = Tensor::new(&[[1.0f64, 0.0]], &Device::Cpu).unwrap();
        let lv = Tensor::new(&[[0.0f64, 1.0]], &Device::Cpu).unwrap();
        // 0.5 * (1) + 0.5 * (e - 1 - 1)
        let want = 0.5 + 0.5 * (1f64.exp() - 2.0);
        assert!((scalar(&kl_divergence(&mu, &lv).unwrap()).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn bce_matches_direct_formula() {
        let x = [-30.0f64, -1.5, 0.0, 2.0, 40.0];
        let t = [0.0f64, 1.0, 1.0, 0.0, 1.0];
        let lt = Tensor::new(&x, &Device::Cpu).unwrap().reshape((1, 5)).unwrap();
        let tt = Tensor::new(&t, &Device::Cpu).unwrap().reshape((1, 5)).unwrap();
        let got = scalar(&bce_with_logits(&lt, &tt).unwrap()).unwrap();
        // -ln(sigmoid(x)) = ln(1 + e^-x), -ln(1 - sigmoid(x)) = ln(1 + e^x)
        let want: f64 = x
            .iter()
            .zip(t)
            .map(|(&x, t)| if t == 1.0 { (-x).exp().ln_1p() } else { x.exp().ln_1p() })
            .sum();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    fn masks(n: usize) -> Vec<ImageGrid> {
        crate::data::SynthConfig {
            n,
            size: 32,
            ..Default::default()
        }
        .generate()
        .unwrap()
        .into_iter()
        .map(|s| s.mask)
        .collect()
    }

    fn small() -> VAEConfig {
        VAEConfig {
            input_size: 32,
            depth: 3,
            base_width: 4,
            epochs: 2,
            batch_size: 4,
            ..Default::default()
        }
    }

    #[test]
    fn identity_stub_scores_one() {
        let m = masks(5);
        let id = |x: &ImageGrid| -> Result<ImageGrid> { Ok(x.clone()) };
        assert_eq!(reconstruction_dice(&id, &m, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn seeded_training_is_deterministic() {
        let m = masks(6);
        let a = train_vae(&m, &small(), 9).unwrap();
        let b = train_vae(&m, &small(), 9).unwrap();
        assert_eq!(a.history, b.history);
        for ((_, x), (_, y)) in a.vae.vars().iter().zip(b.vae.vars()) {
            let x = x.as_tensor().flatten_all().unwrap().to_vec1::<f32>().unwrap();
            let y = y.as_tensor().flatten_all().unwrap().to_vec1::<f32>().unwrap();
            assert_eq!(x, y);
        }
        let d = reconstruction_dice(&a.vae, &m, 0.0).unwrap();
        assert!((0.0..=1.0).contains(&d));
        let manual: f64 = m
            .iter()
            .map(|x| dice(&binarize(&a.vae.reconstruct(x).unwrap(), 0.0), x).unwrap())
            .sum::<f64>()
            / m.len() as f64;
        assert_eq!(d, manual);
    }

    #[test]
    fn sweep_dedups_and_records_failures() {
        let m = masks(4);
        let cfg = VAEConfig {
            epochs: 1,
            ..small()
        };
        let t = sweep_latents(&m, &[2, 2, 3], &cfg, 1).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.warnings.len(), 1);
        let bad = VAEConfig {
            input_size: 64,
            ..cfg
        };
        let t = sweep_latents(&m, &[2], &bad, 1).unwrap();
        assert!(t.rows[0].dice.is_none() && t.rows[0].error.is_some());
        assert!(sweep_latents(&m, &[], &small(), 1).is_err());
        let dir = tempfile::tempdir().unwrap();
        t.write(dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("capacity.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
    }
}
