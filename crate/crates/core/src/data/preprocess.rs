use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{binarize_mask, resize, Interpolation, SamplePair};
use crate::error::{Error, Result};
use crate::seed;

/// Resize-then-crop geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    pub resize_to: usize,
    pub crop_to: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            resize_to: 288,
            crop_to: 256,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.crop_to == 0 || self.crop_to > self.resize_to {
            return Err(Error::config(format!(
                "crop size {} must be in 1..={}",
                self.crop_to, self.resize_to
            )));
        }
        Ok(())
    }
}

/// Resizes a pair to `resize_to` squared and crops `crop_to` squared from it.
///
/// The crop is random (seeded) while training and centred otherwise; image
/// and mask always receive the same transform and the mask is re-binarized
/// afterwards. Samples that already have the crop size pass through
/// untouched in evaluation mode.
pub fn preprocess(
    sample: &SamplePair,
    cfg: PreprocessConfig,
    training: bool,
    seed: u64,
) -> Result<SamplePair> {
    cfg.validate()?;
    let (_, h, w) = sample.image.shape();
    if !training && h == cfg.crop_to && w == cfg.crop_to {
        let mut out = sample.clone();
        out.mask = binarize_mask(&out.mask);
        return Ok(out);
    }
    let image = resize(&sample.image, cfg.resize_to, cfg.resize_to, Interpolation::Bilinear);
    let mask = resize(&sample.mask, cfg.resize_to, cfg.resize_to, Interpolation::Bilinear);
    let slack = cfg.resize_to - cfg.crop_to;
    let (top, left) = if training {
        let mut rng = seed::derived_rng(seed, &[seed::TAG_CROP]);
        (rng.gen_range(0..=slack), rng.gen_range(0..=slack))
    } else {
        (slack / 2, slack / 2)
    };
    Ok(SamplePair {
        id: sample.id.clone(),
        image: image.crop(top, left, cfg.crop_to, cfg.crop_to)?,
        mask: binarize_mask(&mask.crop(top, left, cfg.crop_to, cfg.crop_to)?),
        split: sample.split,
    })
}
