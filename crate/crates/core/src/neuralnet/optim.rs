//! RMSProp and the step-based learning-rate schedule.

use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, MlpParams};
use crate::error::{Error, Result};

pub const DEFAULT_RMSPROP_DECAY: f64 = 0.9;
pub const DEFAULT_RMSPROP_EPS: f64 = 1e-8;

/// Smallest learning rate the per-interval schedule will return.
pub const LR_FLOOR: f64 = 1e-8;

/// Running average of squared gradients, one entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState {
    pub accum: MlpParams,
    pub decay: f64,
    pub eps: f64,
}

impl RmsPropState {
    pub fn new(like: &MlpParams) -> Self {
        Self::with_constants(like, DEFAULT_RMSPROP_DECAY, DEFAULT_RMSPROP_EPS)
    }

    pub fn with_constants(like: &MlpParams, decay: f64, eps: f64) -> Self {
        let mut accum = like.clone();
        accum.values_mut().for_each(|v| *v = 0.0);
        Self { accum, decay, eps }
    }

    /// `a <- decay*a + (1-decay)*g^2`, `p <- p - lr*g/(sqrt(a)+eps)`.
    ///
    /// Nothing is modified when the update would produce a non-finite value.
    pub fn step(&mut self, params: &mut MlpParams, grads: &Gradients, lr: f64) -> Result<()> {
        if !params.same_shape(grads) || !params.same_shape(&self.accum) {
            return Err(Error::Dimension(
                "parameters, gradients and optimizer state differ in shape".into(),
            ));
        }
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate {lr} must be positive")));
        }
        let (rho, eps) = (self.decay, self.eps);
        let mut new_accum = self.accum.clone();
        let mut new_params = params.clone();
        for ((p, a), g) in new_params
            .layers
            .iter_mut()
            .zip(new_accum.layers.iter_mut())
            .zip(&grads.layers)
        {
            Zip::from(&mut p.weights)
                .and(&mut a.weights)
                .and(&g.weights)
                .for_each(|p, a, &g| update(p, a, g, rho, eps, lr));
            Zip::from(&mut p.bias)
                .and(&mut a.bias)
                .and(&g.bias)
                .for_each(|p, a, &g| update(p, a, g, rho, eps, lr));
        }
        if !new_params.is_finite() || !new_accum.is_finite() {
            return Err(Error::NonFinite("RMSProp update produced NaN/Inf".into()));
        }
        *params = new_params;
        self.accum = new_accum;
        Ok(())
    }
}

#[inline]
fn update(p: &mut f64, a: &mut f64, g: f64, rho: f64, eps: f64, lr: f64) {
    *a = rho * *a + (1.0 - rho) * g * g;
    *p -= lr * g / (a.sqrt() + eps);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// The whole run decays by `decay_factor` in `interval_steps` increments.
    TotalDecay,
    /// Divide by `decay_factor` after every completed interval.
    PerInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub initial_lr: f64,
    pub interval_steps: u64,
    pub decay_factor: f64,
    pub mode: ScheduleMode,
    /// Length of the run; only `TotalDecay` reads it.
    pub total_steps: u64,
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr.is_finite() && self.initial_lr > 0.0) {
            return Err(Error::InvalidConfig("initial_lr must be positive".into()));
        }
        if self.interval_steps == 0 {
            return Err(Error::InvalidConfig("interval_steps must be >= 1".into()));
        }
        if !(self.decay_factor.is_finite() && self.decay_factor > 1.0) {
            return Err(Error::InvalidConfig("decay_factor must be > 1".into()));
        }
        Ok(())
    }
}

pub fn lr_at(step: u64, cfg: &ScheduleConfig) -> f64 {
    let completed = step / cfg.interval_steps;
    match cfg.mode {
        ScheduleMode::TotalDecay => {
            let total = (cfg.total_steps / cfg.interval_steps).max(1);
            let frac = completed.min(total) as f64 / total as f64;
            cfg.initial_lr * cfg.decay_factor.powf(-frac)
        }
        ScheduleMode::PerInterval => {
            let lr = cfg.initial_lr * cfg.decay_factor.powf(-(completed as f64));
            lr.max(LR_FLOOR.min(cfg.initial_lr))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::mlp::{DenseLayer, MlpSpec};
    use ndarray::{array, Array1};

    fn scalar(v: f64) -> MlpParams {
        MlpParams {
            layers: vec![DenseLayer {
                weights: array![[v]],
                bias: Array1::zeros(1),
            }],
        }
    }

    #[test]
    fn scalar_update_matches_hand_arithmetic() {
        let mut w = scalar(1.0);
        let g = scalar(1.0);
        let mut state = RmsPropState::new(&w);
        state.step(&mut w, &g, 0.1).unwrap();
        let a = state.accum.layers[0].weights[[0, 0]];
        assert!((a - 0.1).abs() < 1e-15);
        let expected = 1.0 - 0.1 / (0.1f64.sqrt() + 1e-8);
        assert!((w.layers[0].weights[[0, 0]] - expected).abs() < 1e-15);
        assert!((w.layers[0].weights[[0, 0]] - 0.6838).abs() < 1e-4);
    }

    #[test]
    fn zero_gradient_only_decays_state() {
        let spec = MlpSpec::new(2, vec![3], 1).unwrap();
        let mut params = MlpParams::zeros(&spec);
        params.values_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 0.1);
        let before = params.clone();
        let mut state = RmsPropState::new(&params);
        state.accum.values_mut().for_each(|v| *v = 2.0);
        state
            .step(&mut params, &MlpParams::zeros(&spec), 0.01)
            .unwrap();
        assert_eq!(params, before);
        assert!(state.accum.values().all(|v| (v - 1.8).abs() < 1e-15));
    }

    #[test]
    fn two_steps_replay_the_rule() {
        let mut w = scalar(0.5);
        let g = scalar(-0.3);
        let mut state = RmsPropState::new(&w);
        state.step(&mut w, &g, 0.05).unwrap();
        state.step(&mut w, &g, 0.05).unwrap();

        let (mut p, mut a) = (0.5f64, 0.0f64);
        for _ in 0..2 {
            a = 0.9 * a + 0.1 * 0.09;
            p -= 0.05 * -0.3 / (a.sqrt() + 1e-8);
        }
        assert_eq!(w.layers[0].weights[[0, 0]], p);
    }

    #[test]
    fn non_finite_update_leaves_state_untouched() {
        let mut w = scalar(1.0);
        let g = scalar(f64::NAN);
        let mut state = RmsPropState::new(&w);
        assert!(matches!(state.step(&mut w, &g, 0.1), Err(Error::NonFinite(_))));
        assert_eq!(w, scalar(1.0));
        assert_eq!(state.accum, scalar(0.0));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let spec_a = MlpSpec::new(2, vec![3], 1).unwrap();
        let spec_b = MlpSpec::new(2, vec![4], 1).unwrap();
        let mut p = MlpParams::zeros(&spec_a);
        let mut state = RmsPropState::new(&p);
        assert!(state.step(&mut p, &MlpParams::zeros(&spec_b), 0.1).is_err());
    }

    fn full_schedule(mode: ScheduleMode) -> ScheduleConfig {
        ScheduleConfig {
            initial_lr: 5e-5,
            interval_steps: 1000,
            decay_factor: 10.0,
            mode,
            total_steps: 30_000,
        }
    }

    #[test]
    fn schedule_endpoints() {
        let total = full_schedule(ScheduleMode::TotalDecay);
        assert_eq!(lr_at(0, &total), 5e-5);
        assert!((lr_at(30_000, &total) - 5e-6).abs() < 1e-18);
        assert!((lr_at(15_500, &total) - 5e-5 * 10f64.powf(-0.5)).abs() < 1e-18);

        let per = ScheduleConfig {
            initial_lr: 1e-3,
            ..full_schedule(ScheduleMode::PerInterval)
        };
        assert!((lr_at(2500, &per) - 1e-5).abs() < 1e-18);
        assert_eq!(lr_at(29_999, &per), LR_FLOOR);
    }

    #[test]
    fn schedule_is_monotone() {
        for mode in [ScheduleMode::TotalDecay, ScheduleMode::PerInterval] {
            let cfg = full_schedule(mode);
            let mut prev = lr_at(0, &cfg);
            for step in (0..40_000).step_by(37) {
                let lr = lr_at(step, &cfg);
                assert!(lr <= prev && lr > 0.0);
                prev = lr;
            }
        }
    }
}
