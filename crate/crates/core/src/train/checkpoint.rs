//! Binary checkpoint files.
//!
//! Layout: 8-byte magic, `u32` format version, `u64` header length, a JSON
//! header, the raw little-endian tensor payload and a trailing SHA-256 of
//! everything before it.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::{Adam, AdamConfig, AdamSlot};
use super::trainer::TrainState;
use crate::error::{Error, Result};
use crate::losses::LossRow;
use crate::model::{
    tensor_bytes, Discriminator, DiscriminatorSpec, GanModels, Generator, GeneratorSpec, ParamKey,
    ParameterGroup,
};

const MAGIC: &[u8; 8] = b"DP2PCKPT";
const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;
const PREFIX_LEN: usize = 8 + 4 + 8;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlotEntry {
    key: ParamKey,
    steps: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerEntry {
    config: AdamConfig,
    lr: f64,
    slots: Vec<SlotEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    generator: GeneratorSpec,
    discriminator: DiscriminatorSpec,
    dtype: String,
    seed: u64,
    epoch: usize,
    iteration: u64,
    trainable: BTreeMap<ParameterGroup, bool>,
    gen_opt: OptimizerEntry,
    disc_opt: OptimizerEntry,
    tensors: Vec<TensorEntry>,
    history: Vec<LossRow>,
}

fn corrupt(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Checkpoint {
        field: field.into(),
        reason: reason.into(),
    }
}

fn dtype_name(dtype: DType) -> Result<&'static str> {
    match dtype {
        DType::F32 => Ok("f32"),
        DType::F64 => Ok("f64"),
        other => Err(Error::config(format!("cannot checkpoint {other:?} tensors"))),
    }
}

struct PayloadWriter {
    bytes: Vec<u8>,
    entries: Vec<TensorEntry>,
}

impl PayloadWriter {
    fn push(&mut self, name: String, t: &Tensor) -> Result<()> {
        let raw = tensor_bytes(t)?;
        self.entries.push(TensorEntry {
            name,
            shape: t.dims().to_vec(),
            offset: self.bytes.len(),
            len: raw.len(),
        });
        self.bytes.extend_from_slice(&raw);
        Ok(())
    }

    fn optimizer(&mut self, prefix: &str, opt: &Adam) -> Result<OptimizerEntry> {
        let mut slots = Vec::with_capacity(opt.slots.len());
        for (key, slot) in &opt.slots {
            self.push(format!("{prefix}.{key}.m"), &slot.m)?;
            self.push(format!("{prefix}.{key}.v"), &slot.v)?;
            slots.push(SlotEntry {
                key: *key,
                steps: slot.steps,
            });
        }
        Ok(OptimizerEntry {
            config: opt.config,
            lr: opt.lr,
            slots,
        })
    }
}

/// Writes `state` to `path` through a temporary file and a rename, so a
/// crash never leaves a half-written checkpoint under the final name.
pub fn save_checkpoint(state: &TrainState, path: &Path) -> Result<()> {
    let gen = &state.models.generator;
    let disc = &state.models.discriminator;
    let mut payload = PayloadWriter {
        bytes: Vec::new(),
        entries: Vec::new(),
    };
    for p in gen.parameters().iter().chain(disc.parameters().iter()) {
        payload.push(format!("param.{}", p.key), p.var.as_tensor())?;
    }
    let gen_opt = payload.optimizer("gen_opt", &state.gen_opt)?;
    let disc_opt = payload.optimizer("disc_opt", &state.disc_opt)?;
    let mut trainable = gen.trainable_groups().clone();
    trainable.insert(ParameterGroup::Discriminator, disc.is_trainable());
    let header = Header {
        generator: gen.spec().clone(),
        discriminator: disc.spec().clone(),
        dtype: dtype_name(gen.dtype())?.to_string(),
        seed: state.seed,
        epoch: state.epoch,
        iteration: state.iteration,
        trainable,
        gen_opt,
        disc_opt,
        tensors: payload.entries,
        history: state.history.clone(),
    };
    let header = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(PREFIX_LEN + header.len() + payload.bytes.len() + DIGEST_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload.bytes);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);

    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("ckpt.tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&out).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

struct PayloadReader<'a> {
    bytes: &'a [u8],
    entries: BTreeMap<&'a str, &'a TensorEntry>,
    dtype: DType,
}

impl PayloadReader<'_> {
    fn tensor(&self, name: &str, expected_shape: Option<&[usize]>) -> Result<Tensor> {
        let e = self
            .entries
            .get(name)
            .ok_or_else(|| corrupt(name, "missing tensor"))?;
        if let Some(shape) = expected_shape {
            if e.shape != shape {
                return Err(corrupt(name, format!("shape {:?}, expected {shape:?}", e.shape)));
            }
        }
        let numel: usize = e.shape.iter().product();
        let width = if self.dtype == DType::F64 { 8 } else { 4 };
        let end = e.offset.checked_add(e.len).filter(|&end| end <= self.bytes.len());
        let Some(end) = end.filter(|_| e.len == numel * width) else {
            return Err(corrupt(name, "payload range out of bounds"));
        };
        let raw = &self.bytes[e.offset..end];
        let t = if self.dtype == DType::F64 {
            let v: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            Tensor::from_vec(v, e.shape.as_slice(), &Device::Cpu)?
        } else {
            let v: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
                .collect();
            Tensor::from_vec(v, e.shape.as_slice(), &Device::Cpu)?
        };
        Ok(t)
    }

    fn optimizer(&self, prefix: &str, entry: &OptimizerEntry) -> Result<Adam> {
        let mut opt = Adam::new(entry.config, entry.lr);
        for s in &entry.slots {
            opt.slots.insert(
                s.key,
                AdamSlot {
                    m: self.tensor(&format!("{prefix}.{}.m", s.key), None)?,
                    v: self.tensor(&format!("{prefix}.{}.v", s.key), None)?,
                    steps: s.steps,
                },
            );
        }
        Ok(opt)
    }
}

/// Reads a checkpoint, rebuilding models from the specs it embeds.
pub fn load_checkpoint(path: &Path) -> Result<TrainState> {
    load(path, None)
}

/// Like [`load_checkpoint`], but fails with [`Error::SpecMismatch`] unless
/// the embedded specs equal `gen` and `disc`.
pub fn load_checkpoint_for(
    path: &Path,
    gen: &GeneratorSpec,
    disc: &DiscriminatorSpec,
) -> Result<TrainState> {
    load(path, Some((gen, disc)))
}

fn load(path: &Path, expect: Option<(&GeneratorSpec, &DiscriminatorSpec)>) -> Result<TrainState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < PREFIX_LEN + DIGEST_LEN {
        return Err(corrupt("header", "file truncated"));
    }
    if &bytes[..8] != MAGIC {
        return Err(corrupt("magic", "not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(corrupt("version", format!("unsupported version {version}")));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum", "payload truncated or modified"));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let header_end = PREFIX_LEN
        .checked_add(header_len)
        .filter(|&end| end <= body.len())
        .ok_or_else(|| corrupt("header", "header length exceeds file"))?;
    let header: Header = serde_json::from_slice(&body[PREFIX_LEN..header_end])
        .map_err(|e| corrupt("header", e.to_string()))?;

    if let Some((gen, disc)) = expect {
        let mut diffs = Vec::new();
        if &header.generator != gen {
            diffs.push(format!("generator {:?} != {:?}", header.generator, gen));
        }
        if &header.discriminator != disc {
            diffs.push(format!("discriminator {:?} != {:?}", header.discriminator, disc));
        }
        if !diffs.is_empty() {
            return Err(Error::SpecMismatch(diffs.join("; ")));
        }
    }

    let dtype = match header.dtype.as_str() {
        "f32" => DType::F32,
        "f64" => DType::F64,
        other => return Err(corrupt("dtype", format!("unknown dtype `{other}`"))),
    };
    let device = Device::Cpu;
    let mut generator = Generator::new(&header.generator, 0, dtype, &device)
        .map_err(|e| corrupt("generator", e.to_string()))?;
    let mut discriminator = Discriminator::new(&header.discriminator, 0, dtype, &device)
        .map_err(|e| corrupt("discriminator", e.to_string()))?;
    let reader = PayloadReader {
        bytes: &body[header_end..],
        entries: header.tensors.iter().map(|e| (e.name.as_str(), e)).collect(),
        dtype,
    };
    for p in generator.parameters().iter().chain(discriminator.parameters().iter()) {
        let name = format!("param.{}", p.key);
        let t = reader.tensor(&name, Some(p.var.dims()))?;
        p.var.set(&t.to_dtype(dtype)?)?;
    }
    for (&group, &flag) in &header.trainable {
        match group {
            ParameterGroup::Discriminator => discriminator.set_trainable(flag),
            g => generator
                .set_trainable(g, flag)
                .map_err(|e| corrupt("trainable", e.to_string()))?,
        }
    }
    Ok(TrainState {
        models: GanModels::new(generator, discriminator),
        gen_opt: reader.optimizer("gen_opt", &header.gen_opt)?,
        disc_opt: reader.optimizer("disc_opt", &header.disc_opt)?,
        seed: header.seed,
        epoch: header.epoch,
        iteration: header.iteration,
        history: header.history,
    })
}
