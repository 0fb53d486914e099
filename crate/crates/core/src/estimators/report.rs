use serde::{Deserialize, Serialize};

use super::EstimatorKind;
use crate::error::{Error, Result};
use crate::knn::KsgEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: u64,
    pub lr: f64,
    pub reg_loss: f64,
    pub gen_loss: Option<f64>,
}

/// Outcome of one independent training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub run: usize,
    pub seed: u64,
    /// Full-data estimate; `None` when the run failed.
    pub estimate: Option<f64>,
    pub failure: Option<String>,
    pub final_reg_loss: Option<f64>,
    pub final_gen_loss: Option<f64>,
    /// Negated regressor loss on the last training batch.
    pub last_batch_estimate: Option<f64>,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Exponent clamps hit by the f-divergence objective.
    pub clamp_warnings: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TracePoint>,
}

impl RunDiagnostics {
    pub(crate) fn failed(run: usize, seed: u64, msg: String) -> Self {
        Self {
            run,
            seed,
            estimate: None,
            failure: Some(msg),
            final_reg_loss: None,
            final_gen_loss: None,
            last_batch_estimate: None,
            lr_initial: f64::NAN,
            lr_final: f64::NAN,
            clamp_warnings: 0,
            trace: Vec::new(),
        }
    }
}

/// Estimates of all runs and their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: EstimatorKind,
    /// Estimates of the successful runs, in run order.
    pub per_run: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of `per_run` (0 for a single run).
    pub std: f64,
    pub runs: Vec<RunDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ksg: Option<KsgEstimate>,
}

impl EstimateReport {
    pub fn from_runs(estimator: EstimatorKind, runs: Vec<RunDiagnostics>) -> Result<Self> {
        let per_run: Vec<f64> = runs.iter().filter_map(|r| r.estimate).collect();
        if per_run.is_empty() {
            let reasons: Vec<String> = runs.iter().filter_map(|r| r.failure.clone()).collect();
            return Err(Error::AllRunsFailed(reasons.join("; ")));
        }
        for r in runs.iter().filter(|r| r.failure.is_some()) {
            log::warn!("run {} failed: {}", r.run, r.failure.as_deref().unwrap_or(""));
        }
        let (mean, std) = mean_std(&per_run);
        Ok(Self {
            estimator,
            per_run,
            mean,
            std,
            runs,
            ksg: None,
        })
    }

    pub fn from_ksg(estimator: EstimatorKind, est: KsgEstimate) -> Self {
        Self {
            estimator,
            per_run: vec![est.value],
            mean: est.value,
            std: 0.0,
            runs: Vec::new(),
            ksg: Some(est),
        }
    }

    pub fn failed_runs(&self) -> Vec<usize> {
        self.runs
            .iter()
            .filter(|r| r.failure.is_some())
            .map(|r| r.run)
            .collect()
    }
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
