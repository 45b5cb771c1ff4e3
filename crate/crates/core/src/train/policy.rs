use serde::{Deserialize, Serialize};

use crate::data::{Interpolation, NoiseSpec};
use crate::error::{Error, Result};
use crate::model::{DiscriminatorSpec, GeneratorSpec, PathMode};

/// What the noise cycle shows the discriminator as "real".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealPairSource {
    /// `concat(image, mask)`, the same real pair as the image cycle.
    ImageGtPair,
    /// `concat(noise_image, mask)`.
    NoiseGtPair,
}

/// What the discriminator sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminatorInput {
    /// Conditioning input concatenated with the mask.
    Conditional,
    /// The mask alone (unconditional GAN).
    MaskOnly,
}

/// Which cycles run each iteration and how the noise cycle is wired.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CyclePolicy {
    pub image_cycle_enabled: bool,
    pub noise_cycle_enabled: bool,
    pub noise_real_pair_source: RealPairSource,
    /// Route taken by noise inputs through the generator.
    pub noise_routing: PathMode,
    /// Side length of the raw noise draw before upsampling.
    pub noise_grid: usize,
    pub noise_interpolation: Interpolation,
    pub discriminator_input: DiscriminatorInput,
}

impl Default for CyclePolicy {
    fn default() -> Self {
        Self::dynamic()
    }
}

impl CyclePolicy {
    /// Both cycles, noise through the noise bottleneck.
    pub fn dynamic() -> Self {
        Self {
            image_cycle_enabled: true,
            noise_cycle_enabled: true,
            noise_real_pair_source: RealPairSource::ImageGtPair,
            noise_routing: PathMode::NoisePath,
            noise_grid: 4,
            noise_interpolation: Interpolation::Bilinear,
            discriminator_input: DiscriminatorInput::Conditional,
        }
    }

    /// Image cycle only.
    pub fn pix2pix() -> Self {
        Self {
            noise_cycle_enabled: false,
            ..Self::dynamic()
        }
    }

    pub fn noise_spec(&self, input_size: usize) -> NoiseSpec {
        NoiseSpec {
            upsample_mode: self.noise_interpolation,
            ..NoiseSpec::new(self.noise_grid, input_size)
        }
    }

    /// Discriminator input channels this policy produces for `gen`.
    pub fn discriminator_channels(&self, gen: &GeneratorSpec) -> usize {
        match self.discriminator_input {
            DiscriminatorInput::Conditional => gen.input_channels + 1,
            DiscriminatorInput::MaskOnly => 1,
        }
    }

    pub fn validate(&self, gen: &GeneratorSpec, disc: &DiscriminatorSpec) -> Result<()> {
        if !self.image_cycle_enabled && !self.noise_cycle_enabled {
            return Err(Error::config("at least one training cycle must be enabled"));
        }
        if self.image_cycle_enabled && self.discriminator_input == DiscriminatorInput::MaskOnly {
            return Err(Error::config(
                "the image cycle needs a conditional discriminator",
            ));
        }
        if self.noise_cycle_enabled {
            self.noise_spec(gen.input_size).validate()?;
            if gen.input_channels != 1 {
                return Err(Error::config("noise inputs are single-channel"));
            }
        }
        let want = self.discriminator_channels(gen);
        if disc.input_channels != want || disc.input_size != gen.input_size {
            return Err(Error::config(format!(
                "discriminator expects {} channels at {}px, policy feeds {want} at {}px",
                disc.input_channels, disc.input_size, gen.input_size
            )));
        }
        Ok(())
    }
}
