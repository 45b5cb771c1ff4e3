//! The same losses as graph operations, for backpropagation.

use candle_core::Tensor;

use super::PROB_FLOOR;
use crate::error::Result;

fn logit_bound() -> f64 {
    ((1.0 - PROB_FLOOR) / PROB_FLOOR).ln()
}

/// Sigmoid of logits clamped so the probability stays inside
/// `[PROB_FLOOR, 1 - PROB_FLOOR]` (clamping logits is the same as clamping
/// probabilities and keeps `exp` bounded).
pub fn clamped_sigmoid(logits: &Tensor) -> Result<Tensor> {
    let b = logit_bound();
    let x = logits.clamp(-b, b)?;
    Ok((x.neg()?.exp()? + 1.0)?.recip()?)
}

fn clamp_prob(p: &Tensor) -> Result<Tensor> {
    Ok(p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)?)
}

/// Discriminator loss on probability tensors.
pub fn discriminator_loss_probs(real: &Tensor, fake: &Tensor) -> Result<Tensor> {
    let r = clamp_prob(real)?.log()?.mean_all()?;
    let f = clamp_prob(fake)?.affine(-1.0, 1.0)?.log()?.mean_all()?;
    Ok(((r * -0.5)? + (f * -0.5)?)?)
}

/// Generator loss on a probability tensor.
pub fn generator_adversarial_loss_probs(fake: &Tensor) -> Result<Tensor> {
    Ok(clamp_prob(fake)?.log()?.mean_all()?.neg()?)
}

pub fn discriminator_loss(real_logits: &Tensor, fake_logits: &Tensor) -> Result<Tensor> {
    discriminator_loss_probs(&clamped_sigmoid(real_logits)?, &clamped_sigmoid(fake_logits)?)
}

pub fn generator_adversarial_loss(fake_logits: &Tensor) -> Result<Tensor> {
    generator_adversarial_loss_probs(&clamped_sigmoid(fake_logits)?)
}

pub fn l1_loss(prediction: &Tensor, target: &Tensor) -> Result<Tensor> {
    Ok((prediction - target)?.abs()?.mean_all()?)
}

/// Scalar value of a rank-0 tensor as `f64`.
pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{self, ScoreGrid};
    use candle_core::{Device, DType};

    #[test]
    fn agrees_with_pure_versions() {
        let real = [0.8, 0.3, 0.55, 0.999_999_99];
        let fake = [0.1, 0.45, 0.000_000_01, 0.7];
        let t = |v: &[f64]| Tensor::new(v, &Device::Cpu).unwrap();
        let d = scalar(&discriminator_loss_probs(&t(&real), &t(&fake)).unwrap()).unwrap();
        let expect = losses::discriminator_loss(
            &ScoreGrid::probabilities(real.to_vec()).unwrap(),
            &ScoreGrid::probabilities(fake.to_vec()).unwrap(),
        )
        .unwrap();
        assert!((d - expect).abs() < 1e-12);
        let g = scalar(&generator_adversarial_loss_probs(&t(&fake)).unwrap()).unwrap();
        let expect = losses::generator_adversarial_loss(&ScoreGrid::probabilities(fake.to_vec()).unwrap()).unwrap();
        assert!((g - expect).abs() < 1e-12);
    }

    #[test]
    fn extreme_logits_have_finite_gradients() {
        let x = candle_core::Var::new(&[-500.0f32, 500.0, 0.0], &Device::Cpu).unwrap();
        let loss = generator_adversarial_loss(x.as_tensor()).unwrap();
        let grads = loss.backward().unwrap();
        let g = grads.get(&x).unwrap().to_dtype(DType::F64).unwrap().to_vec1::<f64>().unwrap();
        assert!(g.iter().all(|v| v.is_finite()), "{g:?}");
    }
}
