//! Dual-path U-Net generator.
//!
//! Both paths share one encoder and one decoder. The image path runs the
//! encoder, a 3x3 bottleneck at the deepest resolution and the decoder with
//! the usual skip connections. The noise path sends the deepest encoder
//! features through a narrow noise bottleneck (1x1 collapse to one channel,
//! then max-pooling to the code size) and feeds the resulting code to every
//! decoder stage instead of the encoder skips.

use std::collections::BTreeMap;

use candle_core::{DType, Device, Tensor};

use super::layers::{self, Conv2d, ConvShape};
use super::params::{Param, ParamKey, ParamKind};
use super::spec::{GeneratorSpec, ParameterGroup, PathMode, SkipMode};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::seed;

#[derive(Clone, Debug)]
pub struct Generator {
    spec: GeneratorSpec,
    dtype: DType,
    device: Device,
    encoder: Vec<Conv2d>,
    bottleneck: Conv2d,
    noise_bottleneck: Conv2d,
    /// Deepest stage first; the last stage emits the output channel.
    decoder: Vec<Conv2d>,
    trainable: BTreeMap<ParameterGroup, bool>,
}

/// Encoder activations, shallowest first.
#[derive(Clone, Debug)]
pub struct EncoderFeatures(pub Vec<Tensor>);

impl EncoderFeatures {
    pub fn deepest(&self) -> &Tensor {
        self.0.last().expect("encoder has at least one stage")
    }
}

/// Builds a generator in `f32` on the CPU.
pub fn build_generator(spec: &GeneratorSpec, seed: u64) -> Result<Generator> {
    Generator::new(spec, seed, DType::F32, &Device::Cpu)
}

impl Generator {
    pub fn new(spec: &GeneratorSpec, seed: u64, dtype: DType, device: &Device) -> Result<Self> {
        spec.validate()?;
        let mut rng = seed::derived_rng(seed, &[seed::TAG_GEN_INIT]);
        let conv = |rng: &mut _, i, o, k, s, p, gain| {
            Conv2d::new(
                rng,
                ConvShape {
                    in_channels: i,
                    out_channels: o,
                    kernel: k,
                    stride: s,
                    padding: p,
                },
                gain,
                dtype,
                device,
            )
        };
        let d = spec.depth;
        let mut encoder = Vec::with_capacity(d);
        let mut prev = spec.input_channels;
        for k in 1..=d {
            let w = spec.stage_width(k);
            encoder.push(conv(&mut rng, prev, w, 4, 2, 1, layers::leaky_gain())?);
            prev = w;
        }
        let deep = spec.stage_width(d);
        let bottleneck = conv(&mut rng, deep, deep, 3, 1, 1, layers::relu_gain())?;
        let noise_bottleneck = conv(&mut rng, deep, spec.noise_code_shape.channels, 1, 1, 0, 1.0)?;
        let mut decoder = Vec::with_capacity(d);
        for k in (1..=d).rev() {
            let inputs = 2 * spec.stage_width(k);
            let (out, gain) = if k > 1 {
                (spec.stage_width(k - 1), layers::relu_gain())
            } else {
                (1, 1.0)
            };
            decoder.push(conv(&mut rng, inputs, out, 3, 1, 1, gain)?);
        }
        Ok(Self {
            spec: spec.clone(),
            dtype,
            device: device.clone(),
            encoder,
            bottleneck,
            noise_bottleneck,
            decoder,
            trainable: ParameterGroup::GENERATOR.iter().map(|&g| (g, true)).collect(),
        })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// All learnable tensors, in a fixed order.
    pub fn parameters(&self) -> Vec<Param> {
        let mut out = Vec::new();
        let mut push = |group, layer, conv: &Conv2d| {
            out.push(Param {
                key: ParamKey {
                    group,
                    layer,
                    kind: ParamKind::Weight,
                },
                var: conv.weight.clone(),
            });
            out.push(Param {
                key: ParamKey {
                    group,
                    layer,
                    kind: ParamKind::Bias,
                },
                var: conv.bias.clone(),
            });
        };
        for (i, c) in self.encoder.iter().enumerate() {
            push(ParameterGroup::Encoder, i, c);
        }
        push(ParameterGroup::Bottleneck, 0, &self.bottleneck);
        for (i, c) in self.decoder.iter().enumerate() {
            push(ParameterGroup::Decoder, i, c);
        }
        push(ParameterGroup::NoiseBottleneck, 0, &self.noise_bottleneck);
        out
    }

    pub fn set_trainable(&mut self, group: ParameterGroup, flag: bool) -> Result<()> {
        match self.trainable.get_mut(&group) {
            Some(slot) => {
                *slot = flag;
                Ok(())
            }
            None => Err(Error::UnknownGroup(format!("{group} (not a generator group)"))),
        }
    }

    pub fn is_trainable(&self, group: ParameterGroup) -> bool {
        self.trainable.get(&group).copied().unwrap_or(false)
    }

    pub fn trainable_groups(&self) -> &BTreeMap<ParameterGroup, bool> {
        &self.trainable
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let (_, c, h, w) = x.dims4()?;
        let s = self.spec.input_size;
        if c != self.spec.input_channels || h != s || w != s {
            return Err(Error::shape(format!(
                "generator expects (N, {}, {s}, {s}), got {:?}",
                self.spec.input_channels,
                x.dims()
            )));
        }
        Ok(())
    }

    /// Runs the encoder. Stage `k` (1-based) halves the resolution `k` times.
    pub fn encode(&self, x: &Tensor) -> Result<EncoderFeatures> {
        self.check_input(x)?;
        let mut feats = Vec::with_capacity(self.encoder.len());
        let mut h = x.clone();
        for conv in &self.encoder {
            h = layers::leaky_relu(&conv.forward(&h)?)?;
            feats.push(h.clone());
        }
        Ok(EncoderFeatures(feats))
    }

    /// Decoder shared by both paths. `skips[k - 1]` is concatenated at
    /// stage `k`; `deepest_input` enters at the deepest stage.
    fn decode(&self, deepest_input: Tensor, skips: &[Tensor]) -> Result<Tensor> {
        let d = self.spec.depth;
        let mut h = deepest_input;
        for (i, conv) in self.decoder.iter().enumerate() {
            let k = d - i;
            let cat = Tensor::cat(&[&h, &skips[k - 1]], 1)?;
            let size = self.spec.stage_size(k - 1);
            let up = cat.upsample_nearest2d(size, size)?;
            let y = conv.forward(&up)?;
            h = if k > 1 { y.relu()? } else { y.tanh()? };
        }
        Ok(h)
    }

    /// Image-path decoding from precomputed encoder features.
    pub fn decode_image(&self, feats: &EncoderFeatures) -> Result<Tensor> {
        let b = self.bottleneck.forward(feats.deepest())?.relu()?;
        self.decode(b, &feats.0)
    }

    /// Maps the deepest encoder features to the `(N, 1, h, w)` noise code.
    pub fn noise_code(&self, feats: &EncoderFeatures) -> Result<Tensor> {
        let deepest = if self.spec.stop_encoder_grad {
            feats.deepest().detach()
        } else {
            feats.deepest().clone()
        };
        let collapsed = self.noise_bottleneck.forward(&deepest)?;
        let pool = self.spec.deepest_size() / self.spec.noise_code_shape.height;
        Ok(if pool > 1 {
            collapsed.max_pool2d(pool)?
        } else {
            collapsed
        })
    }

    fn broadcast_code(&self, code: &Tensor, channels: usize, size: usize) -> Result<Tensor> {
        let (n, c, _, _) = code.dims4()?;
        let up = layers::resize_t(code, size, self.spec.code_resize)?;
        let up = if c == channels {
            up
        } else {
            up.broadcast_as((n, channels, size, size))?
        };
        Ok(up.contiguous()?)
    }

    /// Noise-path decoding from precomputed encoder features.
    pub fn decode_noise(&self, feats: &EncoderFeatures) -> Result<Tensor> {
        let code = self.noise_code(feats)?;
        let d = self.spec.depth;
        let deepest_input =
            self.broadcast_code(&code, self.spec.stage_width(d), self.spec.deepest_size())?;
        let skips = (1..=d)
            .map(|k| {
                let (w, s) = (self.spec.stage_width(k), self.spec.stage_size(k));
                match self.spec.skip_mode_noise_path {
                    SkipMode::InjectCode => self.broadcast_code(&code, w, s),
                    SkipMode::Zeros => {
                        let n = code.dim(0)?;
                        Ok(Tensor::zeros((n, w, s, s), self.dtype, &self.device)?)
                    }
                    SkipMode::Live => {
                        let f = &feats.0[k - 1];
                        Ok(if self.spec.stop_encoder_grad {
                            f.detach()
                        } else {
                            f.clone()
                        })
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        self.decode(deepest_input, &skips)
    }

    /// Batched forward pass along `path`; input `(N, C, S, S)`, output
    /// `(N, 1, S, S)` in `[-1, 1]`.
    pub fn forward_t(&self, x: &Tensor, path: PathMode) -> Result<Tensor> {
        let feats = self.encode(x)?;
        match path {
            PathMode::ImagePath => self.decode_image(&feats),
            PathMode::NoisePath => self.decode_noise(&feats),
        }
    }

    fn forward_grid(&self, input: &ImageGrid, path: PathMode) -> Result<ImageGrid> {
        let x = input.to_tensor(self.dtype, &self.device)?;
        ImageGrid::from_tensor(&self.forward_t(&x, path)?)
    }

    /// Segments one image along the image path.
    pub fn forward_image(&self, image: &ImageGrid) -> Result<ImageGrid> {
        self.forward_grid(image, PathMode::ImagePath)
    }

    /// Generates one output from an upsampled noise image.
    pub fn forward_noise(&self, noise_image: &ImageGrid) -> Result<ImageGrid> {
        self.forward_grid(noise_image, PathMode::NoisePath)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_noise, NoiseSpec};
    use crate::model::params::{checksum, group_checksum};

    fn toy() -> GeneratorSpec {
        GeneratorSpec {
            input_size: 64,
            base_width: 4,
            depth: 3,
            ..GeneratorSpec::default()
        }
    }

    fn random_image(size: usize, k: u64) -> ImageGrid {
        sample_noise(&NoiseSpec::new(size, size), k).unwrap()
    }

    #[test]
    fn encoder_halves_per_stage() {
        let g = build_generator(&toy(), 1).unwrap();
        let x = random_image(64, 0).to_tensor(DType::F32, &Device::Cpu).unwrap();
        let sizes: Vec<_> = g.encode(&x).unwrap().0.iter().map(|t| t.dim(2).unwrap()).collect();
        assert_eq!(sizes, [32, 16, 8]);
        let again = build_generator(&toy(), 1).unwrap();
        assert_eq!(g.parameters().len(), again.parameters().len());
    }

    #[test]
    fn same_seed_same_weights() {
        let a = build_generator(&toy(), 5).unwrap();
        let b = build_generator(&toy(), 5).unwrap();
        let c = build_generator(&toy(), 6).unwrap();
        assert_eq!(checksum(&a.parameters()).unwrap(), checksum(&b.parameters()).unwrap());
        assert_ne!(checksum(&a.parameters()).unwrap(), checksum(&c.parameters()).unwrap());
    }

    #[test]
    fn bad_spec_is_config_error() {
        let spec = GeneratorSpec {
            input_size: 100,
            depth: 3,
            ..toy()
        };
        assert!(matches!(build_generator(&spec, 0), Err(Error::Config(_))));
    }

    #[test]
    fn outputs_are_bounded_and_deterministic() {
        let g = build_generator(&toy(), 2).unwrap();
        for k in 0..20 {
            let x = random_image(64, k);
            let y = g.forward_image(&x).unwrap();
            assert_eq!(y.shape(), (1, 64, 64));
            assert!(y.in_range(-1.0, 1.0));
            assert_eq!(y, g.forward_image(&x).unwrap());
            let z = g.forward_noise(&x).unwrap();
            assert_eq!(z.shape(), (1, 64, 64));
            assert!(z.in_range(-1.0, 1.0));
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let g = build_generator(&toy(), 2).unwrap();
        assert!(matches!(g.forward_image(&random_image(32, 0)), Err(Error::Shape(_))));
    }

    #[test]
    fn noise_code_is_1x4x4() {
        let g = build_generator(&toy(), 3).unwrap();
        let x = random_image(64, 1).to_tensor(DType::F32, &Device::Cpu).unwrap();
        let code = g.noise_code(&g.encode(&x).unwrap()).unwrap();
        assert_eq!(code.dims(), &[1, 1, 4, 4]);
    }

    #[test]
    fn zeroed_decoder_gives_zero_output() {
        let g = build_generator(&toy(), 4).unwrap();
        for p in g.parameters() {
            if matches!(
                p.key.group,
                ParameterGroup::Decoder | ParameterGroup::Bottleneck | ParameterGroup::NoiseBottleneck
            ) {
                p.var.set(&p.var.zeros_like().unwrap()).unwrap();
            }
        }
        let y = g.forward_noise(&random_image(64, 9)).unwrap();
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_path_ignores_shallow_skip_features() {
        let g = build_generator(&toy(), 7).unwrap();
        let x = random_image(64, 3).to_tensor(DType::F32, &Device::Cpu).unwrap();
        let feats = g.encode(&x).unwrap();
        let base = g.decode_noise(&feats).unwrap();
        let mut perturbed = feats.clone();
        for f in perturbed.0.iter_mut().take(2) {
            *f = (f.clone() + 3.0).unwrap();
        }
        let after = g.decode_noise(&perturbed).unwrap();
        let diff = (base - after).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f32>().unwrap();
        assert_eq!(diff, 0.0);
        // the image path does consume them
        let a = g.decode_image(&feats).unwrap();
        let b = g.decode_image(&perturbed).unwrap();
        let diff = (a - b).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f32>().unwrap();
        assert!(diff > 0.0);
    }

    #[test]
    fn paths_share_decoder_weights() {
        let g = build_generator(&toy(), 8).unwrap();
        let x = random_image(64, 4);
        let (img0, noise0) = (g.forward_image(&x).unwrap(), g.forward_noise(&x).unwrap());
        let last = g.parameters().into_iter().find(|p| {
            p.key.group == ParameterGroup::Decoder && p.key.kind == ParamKind::Bias && p.key.layer == 2
        }).unwrap();
        last.var.set(&(last.var.as_tensor() + 0.5).unwrap()).unwrap();
        assert_ne!(g.forward_image(&x).unwrap(), img0);
        assert_ne!(g.forward_noise(&x).unwrap(), noise0);
    }

    #[test]
    fn trainable_flags() {
        let mut g = build_generator(&toy(), 0).unwrap();
        g.set_trainable(ParameterGroup::Encoder, false).unwrap();
        assert!(!g.is_trainable(ParameterGroup::Encoder));
        assert!(g.set_trainable(ParameterGroup::Discriminator, false).is_err());
        let _ = group_checksum(&g.parameters(), ParameterGroup::Encoder).unwrap();
    }
}
