use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuralnet::{ScheduleConfig, ScheduleMode};

/// Training hyperparameters shared by every neural estimator.
///
/// Network input and output widths follow from the data, so only hidden
/// layer widths are configured here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Hidden widths of the regression (witness) network.
    pub reg_hidden: Vec<usize>,
    /// Hidden widths of the generator.
    pub gen_hidden: Vec<usize>,
    pub batch_size: usize,
    pub training_steps: u64,
    /// Regressor updates per generator update.
    pub reg_training_ratio: usize,
    /// Generator noise width; `None` means the width of the generated block.
    pub noise_dim: Option<usize>,
    /// Independent runs averaged into the final estimate.
    pub runs: usize,
    /// `total_steps` is overwritten with `training_steps` at run time.
    pub schedule: ScheduleConfig,
    pub seed: u64,
    /// Noise draws averaged in the final full-data evaluation.
    pub eval_passes: usize,
    /// Z-score every column before training.
    pub standardize: bool,
    /// Record a loss trace point every this many steps (0 disables).
    pub trace_every: u64,
}

impl EstimatorConfig {
    /// Hyperparameters used for CMI estimation in the original experiments.
    pub fn full_estimation() -> Self {
        Self {
            reg_hidden: vec![128, 32],
            gen_hidden: vec![256, 64],
            batch_size: 4096,
            training_steps: 30_000,
            reg_training_ratio: 2,
            noise_dim: None,
            runs: 10,
            schedule: ScheduleConfig {
                initial_lr: 5e-5,
                interval_steps: 1000,
                decay_factor: 10.0,
                mode: ScheduleMode::TotalDecay,
                total_steps: 30_000,
            },
            seed: 0,
            eval_passes: 10,
            standardize: true,
            trace_every: 0,
        }
    }

    /// Hyperparameters used for conditional-independence testing in the
    /// original experiments.
    pub fn full_cit() -> Self {
        Self {
            reg_hidden: vec![128, 32, 8],
            gen_hidden: vec![128, 64, 16],
            training_steps: 10_000,
            schedule: ScheduleConfig {
                initial_lr: 1e-3,
                total_steps: 10_000,
                ..Self::full_estimation().schedule
            },
            ..Self::full_estimation()
        }
    }

    /// Same networks as [`full_estimation`](Self::full_estimation), scaled
    /// down in batch size and step count to finish in minutes on one CPU core.
    pub fn desk_estimation() -> Self {
        Self {
            batch_size: 512,
            training_steps: 3000,
            runs: 3,
            schedule: ScheduleConfig {
                initial_lr: 1e-3,
                interval_steps: 100,
                decay_factor: 10.0,
                mode: ScheduleMode::TotalDecay,
                total_steps: 3000,
            },
            ..Self::full_estimation()
        }
    }

    /// Desk-scale counterpart of [`full_cit`](Self::full_cit).
    pub fn desk_cit() -> Self {
        Self {
            batch_size: 512,
            training_steps: 1500,
            runs: 1,
            schedule: ScheduleConfig {
                initial_lr: 1e-3,
                interval_steps: 100,
                decay_factor: 10.0,
                mode: ScheduleMode::TotalDecay,
                total_steps: 1500,
            },
            ..Self::full_cit()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.reg_hidden.is_empty() || self.gen_hidden.is_empty() {
            return bad("networks need at least one hidden layer".into());
        }
        if self.batch_size == 0 || self.batch_size > n {
            return bad(format!("batch_size {} must be in 1..={n}", self.batch_size));
        }
        if self.training_steps == 0 {
            return bad("training_steps must be >= 1".into());
        }
        if self.reg_training_ratio == 0 {
            return bad("reg_training_ratio must be >= 1".into());
        }
        if self.runs == 0 {
            return bad("runs must be >= 1".into());
        }
        if self.eval_passes == 0 {
            return bad("eval_passes must be >= 1".into());
        }
        if self.noise_dim == Some(0) {
            return bad("noise_dim must be >= 1".into());
        }
        self.schedule.validate()
    }

    pub(crate) fn run_schedule(&self) -> ScheduleConfig {
        ScheduleConfig {
            total_steps: self.training_steps,
            ..self.schedule.clone()
        }
    }

    pub(crate) fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self::full_estimation()
    }
}
