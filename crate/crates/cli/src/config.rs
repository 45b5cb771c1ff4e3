//! Layered JSON configuration: defaults, then a config file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use dynpix::data::{load_dataset, split_dataset, SamplePair, SplitRatios, Splits, SynthConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::Failure;

/// Reads `file` (if any) over `defaults`. Keys the defaults do not have are
/// collected and reported together.
pub fn layered<T: Serialize + DeserializeOwned>(defaults: &T, file: Option<&Path>) -> Result<T, Failure> {
    let Some(file) = file else {
        return Ok(serde_json::from_value(serde_json::to_value(defaults).map_err(runtime)?).map_err(runtime)?);
    };
    let text = fs::read_to_string(file)
        .with_context(|| format!("cannot read config file {}", file.display()))
        .map_err(Failure::Usage)?;
    let over: Value = serde_json::from_str(&text)
        .with_context(|| format!("config file {} is not valid JSON", file.display()))
        .map_err(Failure::Usage)?;
    let mut base = serde_json::to_value(defaults).map_err(runtime)?;
    let mut unknown = Vec::new();
    merge(&mut base, over, "", &mut unknown);
    if !unknown.is_empty() {
        return Err(Failure::Usage(anyhow!(
            "unknown configuration keys in {}: {}",
            file.display(),
            unknown.join(", ")
        )));
    }
    serde_json::from_value(base)
        .with_context(|| format!("invalid configuration in {}", file.display()))
        .map_err(Failure::Usage)
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn merge(base: &mut Value, over: Value, path: &str, unknown: &mut Vec<String>) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) if same_kind(b, &o) => {
            for (key, value) in o {
                let child = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                match b.get_mut(&key) {
                    Some(slot) => merge(slot, value, &child, unknown),
                    None => unknown.push(child),
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

// Tagged enums switch variant wholesale.
fn same_kind(base: &Map<String, Value>, over: &Map<String, Value>) -> bool {
    match over.get("kind") {
        Some(k) => base.get("kind") == Some(k),
        None => true,
    }
}

/// Where the samples come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synth(SynthConfig),
    Dir {
        path: PathBuf,
        manifest: Option<PathBuf>,
    },
}

/// Dataset plus its train/val/test partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub ratios: SplitRatios,
    pub split_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synth(SynthConfig::default()),
            ratios: SplitRatios {
                train: 80.0 / 110.0,
                val: 10.0 / 110.0,
                test: 20.0 / 110.0,
            },
            split_seed: 0,
        }
    }
}

impl DataConfig {
    pub fn set_dir(&mut self, dir: Option<PathBuf>) {
        if let Some(path) = dir {
            self.source = DataSource::Dir { path, manifest: None };
        }
    }

    pub fn validate(&self) -> dynpix::Result<()> {
        self.ratios.validate()
    }

    pub fn load(&self) -> dynpix::Result<Vec<SamplePair>> {
        match &self.source {
            DataSource::Synth(cfg) => cfg.generate(),
            DataSource::Dir { path, manifest } => load_dataset(path, manifest.as_deref()),
        }
    }

    pub fn splits(&self) -> dynpix::Result<Splits> {
        split_dataset(&self.load()?, &self.ratios, self.split_seed)
    }
}

/// Writes `value` as pretty JSON to `dir/config.json`.
pub fn write_config<T: Serialize>(dir: &Path, value: &T) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}
