use serde::{Deserialize, Serialize};

use crate::data::Interpolation;
use crate::error::{Error, Result};

/// Which generator route a forward pass takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// Encoder, image bottleneck, decoder with live skip connections.
    ImagePath,
    /// Encoder, noise bottleneck, decoder fed by the noise code.
    NoisePath,
}

/// What the decoder receives in place of skip connections on the noise path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipMode {
    /// The noise code, resized to each stage and broadcast over channels.
    InjectCode,
    /// All-zero skip tensors.
    Zeros,
    /// The encoder's own skip features (defeats the bottleneck; ablation only).
    Live,
}

/// Saturating odd output activation onto `[-1, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalActivation {
    #[default]
    Tanh,
}

/// Shape of the code emitted by the noise bottleneck.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for CodeShape {
    fn default() -> Self {
        Self {
            channels: 1,
            height: 4,
            width: 4,
        }
    }
}

/// Architecture of the dual-path U-Net generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub input_size: usize,
    pub input_channels: usize,
    /// Channels of the first encoder stage; doubles per stage up to 8x.
    pub base_width: usize,
    /// Number of stride-2 encoder stages (and matching decoder stages).
    pub depth: usize,
    pub noise_code_shape: CodeShape,
    pub skip_mode_noise_path: SkipMode,
    /// How the noise code is resized to each decoder stage.
    pub code_resize: Interpolation,
    /// Cut the graph between encoder and noise bottleneck so no noise-path
    /// loss can reach encoder parameters.
    pub stop_encoder_grad: bool,
    pub final_activation: FinalActivation,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            input_size: 256,
            input_channels: 1,
            base_width: 16,
            depth: 5,
            noise_code_shape: CodeShape::default(),
            skip_mode_noise_path: SkipMode::InjectCode,
            code_resize: Interpolation::Nearest,
            stop_encoder_grad: true,
            final_activation: FinalActivation::Tanh,
        }
    }
}

const MAX_WIDTH_MULTIPLIER: usize = 8;

impl GeneratorSpec {
    /// The small 64x64 model used for desk-scale experiments.
    pub fn desk() -> Self {
        Self {
            input_size: 64,
            base_width: 8,
            depth: 3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.base_width == 0 || self.input_channels == 0 {
            return Err(Error::config(
                "generator depth, base width and input channels must be positive",
            ));
        }
        let scale = 1usize
            .checked_shl(self.depth as u32)
            .ok_or_else(|| Error::config("generator depth too large"))?;
        if self.input_size == 0 || self.input_size % scale != 0 {
            return Err(Error::config(format!(
                "input size {} is not divisible by 2^{} = {scale}",
                self.input_size, self.depth
            )));
        }
        let code = self.noise_code_shape;
        if code.channels != 1 {
            return Err(Error::config("noise code must have exactly one channel"));
        }
        let deepest = self.deepest_size();
        if code.height == 0
            || code.height != code.width
            || deepest % code.height != 0
        {
            return Err(Error::config(format!(
                "deepest feature size {deepest} cannot be max-pooled to a {}x{} code",
                code.height, code.width
            )));
        }
        Ok(())
    }

    /// Spatial size of encoder stage `k` (1-based).
    pub fn stage_size(&self, k: usize) -> usize {
        self.input_size >> k
    }

    pub fn deepest_size(&self) -> usize {
        self.stage_size(self.depth)
    }

    /// Channel count of encoder stage `k` (1-based).
    pub fn stage_width(&self, k: usize) -> usize {
        self.base_width * (1usize << (k - 1)).min(MAX_WIDTH_MULTIPLIER)
    }
}

/// Architecture of the patch discriminator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorSpec {
    pub input_size: usize,
    /// Conditioning channels plus candidate channels.
    pub input_channels: usize,
    pub base_width: usize,
    /// Number of stride-2 stages before the logit layer.
    pub depth: usize,
}

impl Default for DiscriminatorSpec {
    fn default() -> Self {
        Self {
            input_size: 256,
            input_channels: 2,
            base_width: 64,
            depth: 4,
        }
    }
}

impl DiscriminatorSpec {
    pub fn desk() -> Self {
        Self {
            input_size: 64,
            base_width: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.base_width == 0 || self.input_channels == 0 {
            return Err(Error::config(
                "discriminator depth, width and input channels must be positive",
            ));
        }
        let scale = 1usize
            .checked_shl(self.depth as u32)
            .ok_or_else(|| Error::config("discriminator depth too large"))?;
        if self.input_size < scale || self.input_size % scale != 0 {
            return Err(Error::config(format!(
                "discriminator input {} does not reduce evenly over {} stages",
                self.input_size, self.depth
            )));
        }
        Ok(())
    }

    /// Side length of the logit grid.
    pub fn output_size(&self) -> usize {
        self.input_size >> self.depth
    }

    pub fn stage_width(&self, k: usize) -> usize {
        self.base_width * (1usize << (k - 1)).min(MAX_WIDTH_MULTIPLIER)
    }
}

/// Ownership class of a learnable tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterGroup {
    Encoder,
    Bottleneck,
    Decoder,
    NoiseBottleneck,
    Discriminator,
}

impl ParameterGroup {
    pub const ALL: [ParameterGroup; 5] = [
        ParameterGroup::Encoder,
        ParameterGroup::Bottleneck,
        ParameterGroup::Decoder,
        ParameterGroup::NoiseBottleneck,
        ParameterGroup::Discriminator,
    ];

    pub const GENERATOR: [ParameterGroup; 4] = [
        ParameterGroup::Encoder,
        ParameterGroup::Bottleneck,
        ParameterGroup::Decoder,
        ParameterGroup::NoiseBottleneck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParameterGroup::Encoder => "encoder",
            ParameterGroup::Bottleneck => "bottleneck",
            ParameterGroup::Decoder => "decoder",
            ParameterGroup::NoiseBottleneck => "noise_bottleneck",
            ParameterGroup::Discriminator => "discriminator",
        }
    }
}

impl std::fmt::Display for ParameterGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ParameterGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParameterGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::UnknownGroup(s.to_string()))
    }
}
