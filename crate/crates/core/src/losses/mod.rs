//! Adversarial, L1 and combined generator objectives.
//!
//! All adversarial terms are binary cross-entropy: label 1 for real pairs,
//! label 0 for generated pairs on the discriminator side, and the
//! non-saturating `-log D(fake)` on the generator side. Probabilities are
//! clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before any logarithm.

pub mod tensor;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

pub const PROB_FLOOR: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreScale {
    Probability,
    Logit,
}

/// Discriminator outputs over patches (and batch), flattened.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreGrid {
    values: Vec<f64>,
    scale: ScoreScale,
}

impl ScoreGrid {
    pub fn probabilities(values: Vec<f64>) -> Result<Self> {
        Self::new(values, ScoreScale::Probability)
    }

    pub fn logits(values: Vec<f64>) -> Result<Self> {
        Self::new(values, ScoreScale::Logit)
    }

    pub fn new(values: Vec<f64>, scale: ScoreScale) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::shape("empty score grid"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score grid".into()));
        }
        if scale == ScoreScale::Probability && values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::config("probability score outside [0, 1]"));
        }
        Ok(Self { values, scale })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Clamped probabilities, squashing logits first.
    pub fn clamped_probabilities(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|&v| match self.scale {
                ScoreScale::Probability => v,
                ScoreScale::Logit => 1.0 / (1.0 + (-v).exp()),
            })
            .map(|p| p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
            .collect()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// `-1/2 mean(log D(real)) - 1/2 mean(log(1 - D(fake)))`.
pub fn discriminator_loss(real: &ScoreGrid, fake: &ScoreGrid) -> Result<f64> {
    let r = mean(real.clamped_probabilities().into_iter().map(f64::ln));
    let f = mean(fake.clamped_probabilities().into_iter().map(|p| (1.0 - p).ln()));
    finite(-0.5 * r - 0.5 * f, "discriminator loss")
}

/// Non-saturating generator loss `-mean(log D(fake))`.
pub fn generator_adversarial_loss(fake: &ScoreGrid) -> Result<f64> {
    let f = mean(fake.clamped_probabilities().into_iter().map(f64::ln));
    finite(-f, "generator adversarial loss")
}

/// Mean absolute difference over all elements.
pub fn l1_loss(prediction: &ImageGrid, target: &ImageGrid) -> Result<f64> {
    if prediction.shape() != target.shape() {
        return Err(Error::shape(format!(
            "l1 between {:?} and {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    let d = mean(
        prediction
            .values()
            .iter()
            .zip(target.values())
            .map(|(&p, &t)| (p as f64 - t as f64).abs()),
    );
    finite(d, "l1 loss")
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// Weights of the L1 term (`alpha`) and of both adversarial terms (`beta`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            beta: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::config(format!(
                "loss weights must be finite and non-negative, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// `alpha * l1 + beta * g_adv_image + beta * g_adv_noise`.
pub fn total_generator_objective(l1: f64, g_adv_image: f64, g_adv_noise: f64, w: &LossWeights) -> f64 {
    w.alpha * l1 + w.beta * g_adv_image + w.beta * g_adv_noise
}

/// Losses of one training iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub d_image: f64,
    pub g_adv_image: f64,
    pub l1: f64,
    pub d_noise: f64,
    pub g_adv_noise: f64,
    pub g_total: f64,
}

impl LossRecord {
    /// Fills `g_total` from the other fields.
    pub fn with_total(mut self, w: &LossWeights) -> Self {
        self.g_total = total_generator_objective(self.l1, self.g_adv_image, self.g_adv_noise, w);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(|(_, v)| v.is_finite())
    }

    pub fn fields(&self) -> [(&'static str, f64); 6] {
        [
            ("d_image", self.d_image),
            ("g_adv_image", self.g_adv_image),
            ("l1", self.l1),
            ("d_noise", self.d_noise),
            ("g_adv_noise", self.g_adv_noise),
            ("g_total", self.g_total),
        ]
    }
}

/// One `losses.csv` row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub iteration: u64,
    pub d_image: f64,
    pub g_adv_image: f64,
    pub l1: f64,
    pub d_noise: f64,
    pub g_adv_noise: f64,
    pub g_total: f64,
}

impl LossRow {
    pub fn new(iteration: u64, r: &LossRecord) -> Self {
        Self {
            iteration,
            d_image: r.d_image,
            g_adv_image: r.g_adv_image,
            l1: r.l1,
            d_noise: r.d_noise,
            g_adv_noise: r.g_adv_noise,
            g_total: r.g_total,
        }
    }

    pub fn record(&self) -> LossRecord {
        LossRecord {
            d_image: self.d_image,
            g_adv_image: self.g_adv_image,
            l1: self.l1,
            d_noise: self.d_noise,
            g_adv_noise: self.g_adv_noise,
            g_total: self.g_total,
        }
    }
}
