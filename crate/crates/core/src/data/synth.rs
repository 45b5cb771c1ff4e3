use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{resize, Interpolation, SamplePair};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::seed;

/// Parameters of the synthetic ellipse dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub size: usize,
    pub noise_level: f32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 110,
            size: 64,
            noise_level: 0.6,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn generate(&self) -> Result<Vec<SamplePair>> {
        synthesize_ellipse_dataset(self.n, self.size, self.noise_level, self.seed)
    }
}

const FOREGROUND_LEVEL: f32 = 0.4;
const BACKGROUND_LEVEL: f32 = -0.5;
const TEXTURE_GRID: usize = 8;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl Ellipse {
    /// Whether the pixel centred at `(row + 0.5, col + 0.5)` lies inside.
    pub fn contains(&self, row: usize, col: usize) -> bool {
        let (x, y) = (col as f64 + 0.5 - self.cx, row as f64 + 0.5 - self.cy);
        let (s, c) = self.theta.sin_cos();
        let u = x * c + y * s;
        let v = -x * s + y * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }

    pub fn render(&self, size: usize) -> ImageGrid {
        ImageGrid::from_fn(size, size, |r, c| if self.contains(r, c) { 1.0 } else { -1.0 })
    }
}

/// Filled random ellipses on a noisy textured background.
///
/// Semi-axes are drawn from `[size/8, size/3]` and centres stay within
/// `size/8` of the middle, so every ellipse fits inside the frame. With
/// `noise_level == 0` the image is a fixed two-level rendering of the mask.
pub fn synthesize_ellipse_dataset(
    n: usize,
    size: usize,
    noise_level: f32,
    seed: u64,
) -> Result<Vec<SamplePair>> {
    if n == 0 {
        return Err(Error::config("synthetic dataset needs n >= 1"));
    }
    if size < 16 {
        return Err(Error::config(format!("synthetic size {size} < 16")));
    }
    if !(noise_level.is_finite() && noise_level >= 0.0) {
        return Err(Error::config(format!("noise level {noise_level} must be >= 0")));
    }
    let s = size as f64;
    (0..n)
        .map(|i| {
            let mut rng = seed::derived_rng(seed, &[i as u64]);
            let ellipse = Ellipse {
                cx: s / 2.0 + rng.gen_range(-s / 8.0..=s / 8.0),
                cy: s / 2.0 + rng.gen_range(-s / 8.0..=s / 8.0),
                a: rng.gen_range(s / 8.0..=s / 3.0),
                b: rng.gen_range(s / 8.0..=s / 3.0),
                theta: rng.gen_range(0.0..std::f64::consts::PI),
            };
            let mask = ellipse.render(size);
            let texture_code = ImageGrid::from_fn(TEXTURE_GRID, TEXTURE_GRID, |_, _| {
                rng.gen_range(-1.0f32..=1.0)
            });
            let texture = resize(&texture_code, size, size, Interpolation::Bilinear);
            let mut image = mask.map(|m| if m > 0.0 { FOREGROUND_LEVEL } else { BACKGROUND_LEVEL });
            if noise_level > 0.0 {
                for r in 0..size {
                    for c in 0..size {
                        let speckle: f32 = rng.sample(StandardNormal);
                        let clean = image.get(0, r, c);
                        let v = clean * (1.0 + noise_level * speckle)
                            + noise_level * 0.5 * texture.get(0, r, c);
                        image.set(0, r, c, v.clamp(-1.0, 1.0));
                    }
                }
            }
            SamplePair::new(format!("ellipse_{i:05}"), image, mask)
        })
        .collect()
}
