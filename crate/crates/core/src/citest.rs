//! Conditional-independence decisions from CMI scores and AuROC benchmarking.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{load_csv, ColumnMapping, CsvOptions};
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorConfig, EstimatorKind};
use crate::knn::KsgConfig;
use crate::sample::{Dims, SampleSet};

pub const DEFAULT_THRESHOLD: f64 = 0.01;

/// Ground truth or decision for one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CiLabel {
    /// Conditionally independent.
    CI,
    /// Conditionally dependent.
    CD,
}

impl CiLabel {
    /// 1 for the positive (dependent) class.
    pub fn as_binary(self) -> u8 {
        match self {
            CiLabel::CI => 0,
            CiLabel::CD => 1,
        }
    }
}

impl fmt::Display for CiLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CiLabel::CI => "CI",
            CiLabel::CD => "CD",
        })
    }
}

/// Dependent iff the score strictly exceeds the threshold.
pub fn ci_decide(score: f64, threshold: f64) -> CiLabel {
    if score > threshold {
        CiLabel::CD
    } else {
        CiLabel::CI
    }
}

/// Area under the ROC curve, `P(s+ > s-) + P(s+ = s-)/2`, from the
/// Mann-Whitney statistic with midranks. `labels` are 0/1 with 1 positive.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidInput(format!("label {bad} is not 0 or 1")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput("AuROC needs both classes present".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of (1-based) midranks of the positives, doubled to stay integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        twice_rank_sum += twice_mid * pos_in_group;
        i = j + 1;
    }
    let (p, q) = (pos as u128, neg as u128);
    // U = R - P(P+1)/2; AuROC = U / (P N).
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * q) as f64)
}

/// One labeled dataset of a benchmark suite.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub id: String,
    pub set: SampleSet,
    pub label: CiLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitDatasetResult {
    pub id: String,
    pub label: CiLabel,
    /// `None` when the estimator failed on this dataset.
    pub cmi_score: Option<f64>,
    pub decision: Option<CiLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitBenchReport {
    pub estimator: EstimatorKind,
    pub threshold: f64,
    pub datasets: Vec<CitDatasetResult>,
    /// Over datasets with a score; `None` if fewer than two classes remain.
    pub auroc: Option<f64>,
    /// Fraction of scored datasets whose decision matches the label.
    pub accuracy: Option<f64>,
}

impl CitBenchReport {
    pub fn failed(&self) -> Vec<&str> {
        self.datasets
            .iter()
            .filter(|d| d.cmi_score.is_none())
            .map(|d| d.id.as_str())
            .collect()
    }
}

/// Scores every dataset with `kind` and summarizes. Datasets are evaluated
/// in parallel; each estimate is deterministic, so the report is too.
pub fn run_cit_benchmark(
    datasets: &[LabeledSet],
    kind: EstimatorKind,
    cfg: &EstimatorConfig,
    ksg: &KsgConfig,
    threshold: f64,
) -> Result<CitBenchReport> {
    if !kind.is_conditional() && kind != EstimatorKind::Ksg {
        return Err(Error::InvalidConfig(format!(
            "estimator {kind} does not estimate conditional mutual information"
        )));
    }
    let results: Vec<CitDatasetResult> = datasets
        .par_iter()
        .map(|d| match estimate(kind, &d.set, cfg, ksg) {
            Ok(r) => CitDatasetResult {
                id: d.id.clone(),
                label: d.label,
                cmi_score: Some(r.mean),
                decision: Some(ci_decide(r.mean, threshold)),
                error: None,
            },
            Err(e) => {
                log::warn!("dataset {} failed: {e}", d.id);
                CitDatasetResult {
                    id: d.id.clone(),
                    label: d.label,
                    cmi_score: None,
                    decision: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();

    let scored: Vec<&CitDatasetResult> = results.iter().filter(|r| r.cmi_score.is_some()).collect();
    let scores: Vec<f64> = scored.iter().filter_map(|r| r.cmi_score).collect();
    let labels: Vec<u8> = scored.iter().map(|r| r.label.as_binary()).collect();
    let auroc = auroc(&scores, &labels).ok();
    let accuracy = (!scored.is_empty()).then(|| {
        scored.iter().filter(|r| r.decision == Some(r.label)).count() as f64 / scored.len() as f64
    });
    Ok(CitBenchReport {
        estimator: kind,
        threshold,
        datasets: results,
        auroc,
        accuracy,
    })
}

/// Entry of a benchmark manifest. Columns of the CSV are taken in order as
/// `[x | y | z]` according to `dims`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    #[serde(default)]
    pub id: Option<String>,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub label: CiLabel,
    pub dims: Dims,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub datasets: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Loads every referenced CSV without normalization or shuffling.
    pub fn load(&self, manifest_path: &Path) -> Result<Vec<LabeledSet>> {
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        self.datasets
            .iter()
            .map(|e| {
                let path = if e.path.is_absolute() {
                    e.path.clone()
                } else {
                    base.join(&e.path)
                };
                let loaded = load_csv(&path, &ColumnMapping::by_position(e.dims), &CsvOptions::default())?;
                Ok(LabeledSet {
                    id: e.id.clone().unwrap_or_else(|| e.path.display().to_string()),
                    set: loaded.set,
                    label: e.label,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    den += 1.0;
                    if si > sj {
                        num += 1.0;
                    } else if si == sj {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn decision_rule_is_strict() {
        assert_eq!(ci_decide(0.5, DEFAULT_THRESHOLD), CiLabel::CD);
        assert_eq!(ci_decide(0.0, DEFAULT_THRESHOLD), CiLabel::CI);
        assert_eq!(ci_decide(DEFAULT_THRESHOLD, DEFAULT_THRESHOLD), CiLabel::CI);
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert_eq!(auroc(&[0.1, 0.2, 0.9, 1.0], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.1, 0.4, 0.35, 0.8], &[1, 1, 0, 0]).unwrap(), 0.25);
        let labels = [0, 1, 1, 0, 1];
        let as_scores: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        assert_eq!(auroc(&as_scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn auroc_ties_count_half() {
        assert_eq!(auroc(&[1.0, 1.0], &[0, 1]).unwrap(), 0.5);
        let s = [0.2, 0.2, 0.5, 0.5, 0.5, 0.1];
        let l = [1, 0, 1, 0, 0, 1];
        assert_eq!(auroc(&s, &l).unwrap(), brute(&s, &l));
    }

    #[test]
    fn auroc_rejects_bad_input() {
        assert!(auroc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(auroc(&[0.1], &[1, 0]).is_err());
        assert!(auroc(&[0.1, 0.2], &[0, 2]).is_err());
        assert!(auroc(&[f64::NAN, 0.2], &[0, 1]).is_err());
    }

    #[test]
    fn non_conditional_estimator_rejected() {
        let r = run_cit_benchmark(
            &[],
            EstimatorKind::Migan,
            &EstimatorConfig::desk_cit(),
            &KsgConfig::default(),
            DEFAULT_THRESHOLD,
        );
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn ksg_benchmark_separates_classes() {
        let sets: Vec<LabeledSet> = (0..6)
            .map(|i| {
                let dependent = i % 2 == 1;
                let (set, _, _) = crate::datagen::gen_cit(1000, 1, dependent, 100 + i).unwrap();
                LabeledSet {
                    id: format!("cit{i}"),
                    set,
                    label: if dependent { CiLabel::CD } else { CiLabel::CI },
                }
            })
            .collect();
        let r = run_cit_benchmark(
            &sets,
            EstimatorKind::Ksg,
            &EstimatorConfig::desk_cit(),
            &KsgConfig::default(),
            DEFAULT_THRESHOLD,
        )
        .unwrap();
        assert_eq!(r.datasets.len(), 6);
        assert!(r.failed().is_empty());
        assert!(r.auroc.unwrap() >= 0.5);
    }
}
