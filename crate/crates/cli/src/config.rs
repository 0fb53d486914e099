//! The fully resolved, serializable description of one CLI invocation.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use cmigan::datagen::GenSpec;
use cmigan::dataio::{ColumnMapping, ColumnRef, CsvOptions};
use cmigan::estimators::{EstimatorConfig, EstimatorKind};
use cmigan::knn::KsgConfig;
use cmigan::Dims;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Original estimation hyperparameters (batch 4096, 30k steps, 10 runs).
    Full,
    /// Original CI-testing hyperparameters.
    FullCit,
    /// Scaled-down estimation run for a single CPU core.
    Desk,
    /// Scaled-down CI-testing run.
    DeskCit,
}

impl Preset {
    pub fn config(self) -> EstimatorConfig {
        match self {
            Preset::Full => EstimatorConfig::full_estimation(),
            Preset::FullCit => EstimatorConfig::full_cit(),
            Preset::Desk => EstimatorConfig::desk_estimation(),
            Preset::DeskCit => EstimatorConfig::desk_cit(),
        }
    }
}

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Generated(GenSpec),
    Csv {
        path: PathBuf,
        mapping: ColumnMapping,
        options: CsvOptions,
    },
    Manifest {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: String,
    pub source: Option<DataSource>,
    pub estimator: Option<EstimatorKind>,
    pub estimator_config: Option<EstimatorConfig>,
    pub ksg: Option<KsgConfig>,
    /// CI decision threshold (citest only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    /// Reads a bare `RunConfig` or any report that embeds one under `config`.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let value = match value.get("config") {
            Some(inner) => inner.clone(),
            None => value,
        };
        serde_json::from_value(value).with_context(|| format!("{} is not a run config", path.display()))
    }
}

/// `"0,1"` or `"CO(GT),T"`: all-digit tokens are positions, the rest names.
pub fn parse_columns(list: &str) -> Vec<ColumnRef> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_owned()),
        })
        .collect()
}

/// `"dx,dy,dz"` or `"dx,dy"`.
pub fn parse_dims(s: &str) -> Result<Dims> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad dims `{s}`"))?;
    match parts[..] {
        [dx, dy] => Ok(Dims::new(dx, dy, 0)),
        [dx, dy, dz] => Ok(Dims::new(dx, dy, dz)),
        _ => bail!("dims must be `dx,dy` or `dx,dy,dz`, got `{s}`"),
    }
}

pub fn parse_delimiter(s: &str) -> Result<u8> {
    match s {
        "\\t" | "tab" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => bail!("delimiter must be a single ASCII character, got `{s}`"),
    }
}
