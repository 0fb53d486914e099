//! Neural CMI and MI estimators.

mod cmigan;
mod config;
mod fmine;
mod midiff;
mod midiff_gan;
mod report;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cmigan::{cmi_gan_estimate, mi_gan_estimate};
pub use config::EstimatorConfig;
pub use fmine::f_mine_mi_estimate;
pub use midiff::{mi_diff_cmi_estimate, MiBase};
pub use midiff_gan::mi_diff_gan_estimate;
pub use report::{mean_std, EstimateReport, RunDiagnostics, TracePoint};

use crate::error::{Error, Result};
use crate::knn::{ksg_cmi, ksg_mi, KsgConfig};
use crate::sample::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Cmigan,
    Migan,
    Midiffgan,
    Fmine,
    MidiffFmine,
    Ksg,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::Cmigan,
        EstimatorKind::Migan,
        EstimatorKind::Midiffgan,
        EstimatorKind::Fmine,
        EstimatorKind::MidiffFmine,
        EstimatorKind::Ksg,
    ];

    pub fn id(self) -> &'static str {
        match self {
            EstimatorKind::Cmigan => "cmigan",
            EstimatorKind::Migan => "migan",
            EstimatorKind::Midiffgan => "midiffgan",
            EstimatorKind::Fmine => "fmine",
            EstimatorKind::MidiffFmine => "midiff-fmine",
            EstimatorKind::Ksg => "ksg",
        }
    }

    /// Whether the estimator targets `I(X;Y|Z)` and so needs `dz >= 1`.
    pub fn is_conditional(self) -> bool {
        matches!(
            self,
            EstimatorKind::Cmigan | EstimatorKind::Midiffgan | EstimatorKind::MidiffFmine
        )
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| {
                let ids: Vec<&str> = Self::ALL.iter().map(|k| k.id()).collect();
                Error::InvalidConfig(format!("unknown estimator '{s}' (expected one of {})", ids.join(", ")))
            })
    }
}

/// Runs the chosen estimator. KSG estimates `I(X;Y|Z)` when `dz >= 1` and
/// `I(X;Y)` otherwise; it ignores `cfg`.
pub fn estimate(
    kind: EstimatorKind,
    s: &SampleSet,
    cfg: &EstimatorConfig,
    ksg: &KsgConfig,
) -> Result<EstimateReport> {
    match kind {
        EstimatorKind::Cmigan => cmi_gan_estimate(s, cfg),
        EstimatorKind::Migan => mi_gan_estimate(s, cfg),
        EstimatorKind::Midiffgan => mi_diff_gan_estimate(s, cfg),
        EstimatorKind::Fmine => f_mine_mi_estimate(s, cfg),
        EstimatorKind::MidiffFmine => mi_diff_cmi_estimate(s, MiBase::Fmine, cfg, ksg),
        EstimatorKind::Ksg => {
            let est = if s.dims().dz == 0 {
                ksg_mi(s.x(), s.y(), ksg)?
            } else {
                ksg_cmi(s.x(), s.y(), s.z(), ksg)?
            };
            Ok(EstimateReport::from_ksg(EstimatorKind::Ksg, est))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_gauss, gen_linear3};

    fn tiny() -> EstimatorConfig {
        EstimatorConfig {
            reg_hidden: vec![16],
            gen_hidden: vec![16],
            batch_size: 64,
            training_steps: 20,
            runs: 2,
            eval_passes: 2,
            ..EstimatorConfig::desk_estimation()
        }
    }

    #[test]
    fn ids_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.id().parse::<EstimatorKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.id()));
        }
        assert!("mine".parse::<EstimatorKind>().is_err());
    }

    #[test]
    fn every_estimator_runs_and_is_deterministic() {
        let (cond, _) = gen_linear3(400, 1, 3).unwrap();
        let (plain, _) = gen_gauss(400, 1, 0.5, 3).unwrap();
        for k in EstimatorKind::ALL {
            let s = if k.is_conditional() || k == EstimatorKind::Ksg {
                &cond
            } else {
                &plain
            };
            let a = estimate(k, s, &tiny(), &KsgConfig::default()).unwrap();
            let b = estimate(k, s, &tiny(), &KsgConfig::default()).unwrap();
            assert_eq!(a.per_run, b.per_run, "{k}");
            assert!(a.mean.is_finite(), "{k}");
            assert_eq!(a.estimator, k);
        }
    }

    #[test]
    fn dimension_preconditions() {
        let (cond, _) = gen_linear3(200, 1, 0).unwrap();
        let (plain, _) = gen_gauss(200, 1, 0.5, 0).unwrap();
        let cfg = tiny();
        assert!(matches!(cmi_gan_estimate(&plain, &cfg), Err(Error::Dimension(_))));
        assert!(matches!(mi_diff_gan_estimate(&plain, &cfg), Err(Error::Dimension(_))));
        assert!(matches!(mi_gan_estimate(&cond, &cfg), Err(Error::Dimension(_))));
        assert!(matches!(f_mine_mi_estimate(&cond, &cfg), Err(Error::Dimension(_))));
    }

    #[test]
    fn diverged_runs_are_excluded() {
        // An absurd learning rate drives the losses to overflow.
        let (s, _) = gen_gauss(300, 1, 0.9, 1).unwrap();
        let mut cfg = tiny();
        cfg.schedule.initial_lr = 1e200;
        match mi_gan_estimate(&s, &cfg) {
            Err(Error::AllRunsFailed(_)) => {}
            Ok(r) => assert_eq!(r.per_run.len(), cfg.runs - r.failed_runs().len()),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn midiff_runs_are_paired() {
        let (s, _) = gen_linear3(300, 1, 5).unwrap();
        let cfg = tiny();
        let r = mi_diff_cmi_estimate(&s, MiBase::Migan, &cfg, &KsgConfig::default()).unwrap();
        assert_eq!(r.runs.len(), cfg.runs);
        for (i, run) in r.runs.iter().enumerate() {
            assert_eq!(run.seed, cfg.seed + i as u64);
        }
    }
}
