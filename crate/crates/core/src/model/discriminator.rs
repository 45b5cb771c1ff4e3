use candle_core::{DType, Device, Tensor};

use super::layers::{self, Conv2d, ConvShape};
use super::params::{Param, ParamKey, ParamKind};
use super::spec::{DiscriminatorSpec, ParameterGroup};
use crate::error::{Error, Result};
use crate::seed;

/// Strided convolutional patch classifier. Emits one logit per patch.
#[derive(Clone, Debug)]
pub struct Discriminator {
    spec: DiscriminatorSpec,
    stages: Vec<Conv2d>,
    head: Conv2d,
    trainable: bool,
}

pub fn build_discriminator(spec: &DiscriminatorSpec, seed: u64) -> Result<Discriminator> {
    Discriminator::new(spec, seed, DType::F32, &Device::Cpu)
}

impl Discriminator {
    pub fn new(spec: &DiscriminatorSpec, seed: u64, dtype: DType, device: &Device) -> Result<Self> {
        spec.validate()?;
        let mut rng = seed::derived_rng(seed, &[seed::TAG_DISC_INIT]);
        let mut stages = Vec::with_capacity(spec.depth);
        let mut prev = spec.input_channels;
        for k in 1..=spec.depth {
            let w = spec.stage_width(k);
            let shape = ConvShape {
                in_channels: prev,
                out_channels: w,
                kernel: 4,
                stride: 2,
                padding: 1,
            };
            stages.push(Conv2d::new(&mut rng, shape, layers::leaky_gain(), dtype, device)?);
            prev = w;
        }
        let head = Conv2d::new(
            &mut rng,
            ConvShape {
                in_channels: prev,
                out_channels: 1,
                kernel: 3,
                stride: 1,
                padding: 1,
            },
            1.0,
            dtype,
            device,
        )?;
        Ok(Self {
            spec: spec.clone(),
            stages,
            head,
            trainable: true,
        })
    }

    pub fn spec(&self) -> &DiscriminatorSpec {
        &self.spec
    }

    /// Logits `(N, 1, g, g)` for an `(N, C, S, S)` batch of stacked
    /// conditioning and candidate channels.
    pub fn forward_t(&self, x: &Tensor) -> Result<Tensor> {
        let (_, c, h, w) = x.dims4()?;
        let s = self.spec.input_size;
        if c != self.spec.input_channels || h != s || w != s {
            return Err(Error::shape(format!(
                "discriminator expects (N, {}, {s}, {s}), got {:?}",
                self.spec.input_channels,
                x.dims()
            )));
        }
        let mut h = x.clone();
        for conv in &self.stages {
            h = layers::leaky_relu(&conv.forward(&h)?)?;
        }
        self.head.forward(&h)
    }

    pub fn parameters(&self) -> Vec<Param> {
        let mut out = Vec::new();
        let convs = self.stages.iter().chain(std::iter::once(&self.head));
        for (layer, conv) in convs.enumerate() {
            for (kind, var) in [(ParamKind::Weight, &conv.weight), (ParamKind::Bias, &conv.bias)] {
                out.push(Param {
                    key: ParamKey {
                        group: ParameterGroup::Discriminator,
                        layer,
                        kind,
                    },
                    var: var.clone(),
                });
            }
        }
        out
    }

    pub fn set_trainable(&mut self, flag: bool) {
        self.trainable = flag;
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }
}
