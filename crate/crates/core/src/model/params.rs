use candle_core::{DType, Var};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::spec::ParameterGroup;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Weight,
    Bias,
}

/// Stable identity of a learnable tensor: `(group, layer index, kind)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamKey {
    pub group: ParameterGroup,
    pub layer: usize,
    pub kind: ParamKind,
}

impl std::fmt::Display for ParamKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            ParamKind::Weight => "weight",
            ParamKind::Bias => "bias",
        };
        write!(f, "{}.{}.{kind}", self.group, self.layer)
    }
}

/// A learnable tensor together with its key. Cloning shares the storage.
#[derive(Clone, Debug)]
pub struct Param {
    pub key: ParamKey,
    pub var: Var,
}

/// Raw little-endian bytes of a parameter in its storage dtype.
pub(crate) fn tensor_bytes(t: &candle_core::Tensor) -> Result<Vec<u8>> {
    let flat = t.flatten_all()?;
    Ok(match t.dtype() {
        DType::F64 => flat
            .to_vec1::<f64>()?
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect(),
        _ => flat
            .to_dtype(DType::F32)?
            .to_vec1::<f32>()?
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect(),
    })
}

/// SHA-256 over the keys and exact bit patterns of `params`.
pub fn checksum<'a>(params: impl IntoIterator<Item = &'a Param>) -> Result<String> {
    let mut hasher = Sha256::new();
    for p in params {
        hasher.update(p.key.to_string().as_bytes());
        hasher.update(tensor_bytes(p.var.as_tensor())?);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Checksum of the parameters in one group.
pub fn group_checksum(params: &[Param], group: ParameterGroup) -> Result<String> {
    checksum(params.iter().filter(|p| p.key.group == group))
}
