//! CSV import/export and JSON sidecars.
//!
//! Numbers are written with the shortest representation that parses back to
//! the same `f64`, so `load_csv(save_csv(s)) == s` bitwise.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{ModelParams, RNG_ALGORITHM};
use crate::error::{Error, Result};
use crate::sample::{standardize_columns, Dims, SampleSet};

/// Value marking a missing measurement in the UCI air-quality data.
pub const AIR_QUALITY_MISSING: f64 = -200.0;
pub const DEFAULT_MAX_BYTES: u64 = 1 << 30;

/// A column selected by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_owned())
    }
}

impl From<usize> for ColumnRef {
    fn from(i: usize) -> Self {
        ColumnRef::Index(i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Zscore,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    pub x_cols: Vec<ColumnRef>,
    pub y_cols: Vec<ColumnRef>,
    #[serde(default)]
    pub z_cols: Vec<ColumnRef>,
    #[serde(default)]
    pub normalization: Normalization,
    /// Row shuffle applied after loading; no shuffle when absent.
    #[serde(default)]
    pub shuffle_seed: Option<u64>,
}

impl ColumnMapping {
    /// The first `dx` columns as x, the next `dy` as y and the next `dz` as z.
    pub fn by_position(dims: Dims) -> Self {
        let range = |a: usize, b: usize| (a..b).map(ColumnRef::Index).collect();
        Self {
            x_cols: range(0, dims.dx),
            y_cols: range(dims.dx, dims.dx + dims.dy),
            z_cols: range(dims.dx + dims.dy, dims.total()),
            normalization: Normalization::None,
            shuffle_seed: None,
        }
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.x_cols.len(), self.y_cols.len(), self.z_cols.len())
    }

    fn resolve(&self, header: &[String]) -> Result<Vec<usize>> {
        if self.x_cols.is_empty() || self.y_cols.is_empty() {
            return Err(Error::InvalidConfig("mapping needs at least one x and one y column".into()));
        }
        let mut idx = Vec::new();
        for c in self.x_cols.iter().chain(&self.y_cols).chain(&self.z_cols) {
            let i = match c {
                ColumnRef::Index(i) if *i < header.len() => *i,
                ColumnRef::Index(i) => return Err(Error::MissingColumn(format!("#{i}"))),
                ColumnRef::Name(n) => header
                    .iter()
                    .position(|h| h.trim() == n)
                    .ok_or_else(|| Error::MissingColumn(n.clone()))?,
            };
            if idx.contains(&i) {
                return Err(Error::InvalidConfig(format!(
                    "column `{}` mapped more than once",
                    header[i]
                )));
            }
            idx.push(i);
        }
        Ok(idx)
    }
}

/// CSV dialect and safety limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvOptions {
    pub delimiter: u8,
    /// Parse `1,5` as 1.5 (needs a delimiter other than ',').
    pub decimal_comma: bool,
    /// Values equal to this in mapped columns count as missing.
    pub missing_sentinel: Option<f64>,
    pub max_bytes: u64,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            decimal_comma: false,
            missing_sentinel: Some(AIR_QUALITY_MISSING),
            max_bytes: DEFAULT_MAX_BYTES,
        }
    }
}

impl CsvOptions {
    /// Semicolon-separated values with decimal commas, as in the UCI
    /// air-quality export.
    pub fn semicolon_decimal_comma() -> Self {
        Self {
            delimiter: b';',
            decimal_comma: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub set: SampleSet,
    /// Names of the mapped columns in `[x | y | z]` order.
    pub columns: Vec<String>,
    pub kept: usize,
    pub dropped: usize,
}

fn parse_field(raw: &str, opts: &CsvOptions) -> Option<f64> {
    let t = raw.trim();
    let v: f64 = if opts.decimal_comma {
        t.replace(',', ".").parse().ok()?
    } else {
        t.parse().ok()?
    };
    if !v.is_finite() || opts.missing_sentinel == Some(v) {
        return None;
    }
    Some(v)
}

/// Reads the mapped columns of a headed CSV into a [`SampleSet`]. Rows with a
/// missing, non-numeric, non-finite or sentinel value in any mapped column
/// are dropped and counted.
pub fn load_csv(path: &Path, mapping: &ColumnMapping, opts: &CsvOptions) -> Result<LoadedCsv> {
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.len() > opts.max_bytes {
        return Err(Error::InvalidInput(format!(
            "{} is {} bytes, above the {} byte limit",
            path.display(),
            meta.len(),
            opts.max_bytes
        )));
    }
    if opts.decimal_comma && opts.delimiter == b',' {
        return Err(Error::InvalidConfig("decimal commas need a non-comma delimiter".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .flexible(true)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let idx = mapping.resolve(&header)?;

    let mut values = Vec::new();
    let (mut kept, mut dropped) = (0, 0);
    let mut row = Vec::with_capacity(idx.len());
    for record in reader.records() {
        let record = record?;
        // Fully blank lines are not rows.
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        row.clear();
        row.extend(idx.iter().map_while(|&i| record.get(i).and_then(|f| parse_field(f, opts))));
        if row.len() == idx.len() {
            values.extend_from_slice(&row);
            kept += 1;
        } else {
            dropped += 1;
        }
    }
    if kept == 0 {
        return Err(Error::NoUsableRows {
            path: path.to_owned(),
            dropped,
        });
    }
    if dropped > 0 {
        log::info!("{}: dropped {dropped} of {} rows", path.display(), kept + dropped);
    }

    let mut data = Array2::from_shape_vec((kept, idx.len()), values).expect("row width is fixed");
    if mapping.normalization == Normalization::Zscore {
        standardize_columns(&mut data);
    }
    let mut set = SampleSet::new(data, mapping.dims())?;
    if let Some(seed) = mapping.shuffle_seed {
        set = set.permuted_rows(&shuffle_permutation(kept, seed))?;
    }
    Ok(LoadedCsv {
        set,
        columns: idx.iter().map(|&i| header[i].clone()).collect(),
        kept,
        dropped,
    })
}

/// The fixed row permutation used for `shuffle_seed`.
pub fn shuffle_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}

/// `x1.., y1.., z1..` header names for a sample table.
pub fn default_header(dims: Dims) -> Vec<String> {
    let block = |p: &'static str, k: usize| (1..=k).map(move |i| format!("{p}{i}"));
    block("x", dims.dx)
        .chain(block("y", dims.dy))
        .chain(block("z", dims.dz))
        .collect()
}

/// Shortest decimal that parses back to exactly `v`; always '.' as the
/// decimal point.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Writes `s` as comma-separated values with a header row.
pub fn save_csv(s: &SampleSet, path: &Path, header: Option<&[String]>) -> Result<()> {
    let names = match header {
        Some(h) if h.len() != s.dims().total() => {
            return Err(Error::Dimension(format!(
                "{} header names for {} columns",
                h.len(),
                s.dims().total()
            )))
        }
        Some(h) => h.to_vec(),
        None => default_header(s.dims()),
    };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&names)?;
    for row in s.data().rows() {
        w.write_record(row.iter().map(|&v| format_f64(v)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// JSON written next to a generated CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub params: ModelParams,
    /// Closed-form `I(X;Y|Z)` (or `I(X;Y)`) when one exists.
    pub true_cmi: Option<f64>,
    pub rng: String,
}

impl DatasetSidecar {
    pub fn new(params: ModelParams, true_cmi: Option<f64>) -> Self {
        Self {
            params,
            true_cmi,
            rng: RNG_ALGORITHM.to_owned(),
        }
    }
}

/// `data.csv` -> `data.params.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("params.json")
}

pub fn write_sidecar(path: &Path, sidecar: &DatasetSidecar) -> Result<()> {
    let text = serde_json::to_string_pretty(sidecar)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_sidecar(path: &Path) -> Result<DatasetSidecar> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
