use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{resize, Interpolation};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::seed;

/// Low-resolution uniform noise that is upsampled to image size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Side length of the raw draw.
    pub grid: usize,
    pub low: f32,
    pub high: f32,
    pub upsample_mode: Interpolation,
    pub target_size: usize,
}

impl NoiseSpec {
    pub fn new(grid: usize, target_size: usize) -> Self {
        Self {
            grid,
            low: -1.0,
            high: 1.0,
            upsample_mode: Interpolation::Bilinear,
            target_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low < self.high) || !self.low.is_finite() || !self.high.is_finite() {
            return Err(Error::config(format!(
                "noise range [{}, {}] is empty",
                self.low, self.high
            )));
        }
        if self.grid == 0 || self.grid > self.target_size {
            return Err(Error::config(format!(
                "noise grid {} must be in 1..={}",
                self.grid, self.target_size
            )));
        }
        Ok(())
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::new(4, 256)
    }
}

/// The raw `grid x grid` i.i.d. uniform draw behind [`sample_noise`].
pub fn draw_noise_code(spec: &NoiseSpec, seed: u64) -> Result<ImageGrid> {
    spec.validate()?;
    let mut rng = seed::derived_rng(seed, &[seed::TAG_NOISE]);
    let values = (0..spec.grid * spec.grid)
        .map(|_| rng.gen_range(spec.low..=spec.high))
        .collect();
    ImageGrid::new(1, spec.grid, spec.grid, values)
}

/// Draws the noise code and upsamples it to `target_size` squared.
pub fn sample_noise(spec: &NoiseSpec, seed: u64) -> Result<ImageGrid> {
    let code = draw_noise_code(spec, seed)?;
    Ok(resize(&code, spec.target_size, spec.target_size, spec.upsample_mode))
}
