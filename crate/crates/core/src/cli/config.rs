//! Run configuration: a TOML file, `--set key=value` overrides, and defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::source::DataSpec;
use crate::enrichment::EnrichConfig;
use crate::genetic::GaConfig;
use crate::nn::TrainConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Master seed; every stage derives its stream from it.
    pub seed: u64,
    /// Worker threads, 0 for one per core.
    pub threads: usize,
    pub out_dir: PathBuf,
    /// Run directory name under `out_dir`; defaults to the command name.
    pub run_id: Option<String>,
    /// Solver checkpoint read by generate, rehearse, boundary and bench.
    pub solver: Option<PathBuf>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub genetic: GaConfig,
    pub enrichment: EnrichConfig,
    pub data: DataConfig,
    pub generate: GenerateConfig,
    pub rehearse: RehearseConfig,
    pub train_on_synth: TrainOnSynthConfig,
    pub boundary: BoundaryConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            threads: 0,
            out_dir: PathBuf::from("runs"),
            run_id: None,
            solver: None,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            genetic: GaConfig::default(),
            enrichment: EnrichConfig::default(),
            data: DataConfig::default(),
            generate: GenerateConfig::default(),
            rehearse: RehearseConfig::default(),
            train_on_synth: TrainOnSynthConfig::default(),
            boundary: BoundaryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    /// Output units; defaults to the largest label space among the inputs.
    pub num_classes: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_dim: 256,
            num_classes: None,
        }
    }
}

/// Named dataset roles. Each command reads the roles it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub train: Option<DataSpec>,
    pub test: Option<DataSpec>,
    pub synthetic: Option<DataSpec>,
    pub synthetic_b: Option<DataSpec>,
    pub old: Option<DataSpec>,
    pub old_test: Option<DataSpec>,
    pub new_train: Option<DataSpec>,
    pub new_test: Option<DataSpec>,
    pub samples: Option<DataSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    /// Classes `0..num_classes` are evolved; defaults to every solver output.
    pub num_classes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RehearseConfig {
    pub scheme: String,
    pub sweep_fraction: f64,
    /// Added to new-task labels so both tasks share one head.
    pub new_label_offset: usize,
    /// Random-vector baseline size; defaults to matching `data.old`.
    pub random_per_class: Option<usize>,
    pub random_classes: Option<usize>,
}

impl Default for RehearseConfig {
    fn default() -> Self {
        RehearseConfig {
            scheme: "interleaved".into(),
            sweep_fraction: 0.5,
            new_label_offset: 0,
            random_per_class: None,
            random_classes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOnSynthConfig {
    pub nets: usize,
}

impl Default for TrainOnSynthConfig {
    fn default() -> Self {
        TrainOnSynthConfig { nets: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    pub keep_fraction: f64,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig { keep_fraction: 0.05 }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Apply one `a.b.c=value` override. Values parse as TOML, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key '{key}' is malformed")));
    }
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for (i, p) in parents.iter().enumerate() {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override '{key}': '{}' is not a table", parts[..=i].join(".")))
        })?;
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

impl Config {
    /// Defaults, then the file (if any), then the overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| Error::Config(format!("{}: {}", p.display(), e.message())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.resolve_seeds();
        Ok(cfg)
    }

    /// Every stage seed follows the master seed.
    pub fn resolve_seeds(&mut self) {
        self.train.seed = self.seed;
        self.genetic.seed = self.seed;
    }

    pub fn run_dir(&self, command: &str) -> PathBuf {
        self.out_dir.join(self.run_id.as_deref().unwrap_or(command))
    }
}
