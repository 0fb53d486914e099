//! CMI through the chain rule `I(X;Y|Z) = I(X;YZ) - I(X;Z)` on top of any
//! MI estimator.

use ndarray::concatenate;
use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::report::{EstimateReport, RunDiagnostics};
use super::{f_mine_mi_estimate, mi_gan_estimate, EstimatorConfig, EstimatorKind};
use crate::error::{Error, Result};
use crate::knn::{ksg_mi, KsgConfig, KsgEstimate};
use crate::sample::{Dims, SampleSet};

/// MI estimator underneath the difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MiBase {
    Fmine,
    Migan,
    Ksg,
}

pub fn mi_diff_cmi_estimate(
    s: &SampleSet,
    base: MiBase,
    cfg: &EstimatorConfig,
    ksg: &KsgConfig,
) -> Result<EstimateReport> {
    let d = s.dims();
    if d.dz == 0 {
        return Err(Error::Dimension("MI difference needs a conditioning block (dz >= 1)".into()));
    }
    if base == MiBase::Ksg {
        let yz = concatenate(Axis(1), &[s.y(), s.z()]).map_err(|e| Error::Dimension(e.to_string()))?;
        let full = ksg_mi(s.x(), yz.view(), ksg)?;
        let marginal = ksg_mi(s.x(), s.z(), ksg)?;
        let est = KsgEstimate {
            value: full.value - marginal.value,
            jittered: full.jittered || marginal.jittered,
            degenerate: full.degenerate || marginal.degenerate,
        };
        return Ok(EstimateReport::from_ksg(EstimatorKind::Ksg, est));
    }

    let prepared = if cfg.standardize {
        s.standardized()
    } else {
        s.clone()
    };
    // Both halves already standardized; skip doing it twice.
    let inner = EstimatorConfig {
        standardize: false,
        ..cfg.clone()
    };
    let x_yz = SampleSet::new(prepared.data().clone(), Dims::new(d.dx, d.dy + d.dz, 0))?;
    let x_z = SampleSet::from_blocks(prepared.x(), prepared.z(), None)?;
    let run = |set: &SampleSet| match base {
        MiBase::Fmine => f_mine_mi_estimate(set, &inner),
        MiBase::Migan => mi_gan_estimate(set, &inner),
        MiBase::Ksg => unreachable!(),
    };
    let full = run(&x_yz)?;
    let marginal = run(&x_z)?;

    // Runs share seeds, so per-run differences pair up.
    let runs = full
        .runs
        .iter()
        .zip(&marginal.runs)
        .map(|(a, b)| match (a.estimate, b.estimate) {
            (Some(ea), Some(eb)) => RunDiagnostics {
                estimate: Some(ea - eb),
                last_batch_estimate: a.last_batch_estimate.zip(b.last_batch_estimate).map(|(p, q)| p - q),
                clamp_warnings: a.clamp_warnings + b.clamp_warnings,
                ..a.clone()
            },
            _ => RunDiagnostics::failed(
                a.run,
                a.seed,
                [a.failure.as_deref(), b.failure.as_deref()]
                    .into_iter()
                    .flatten()
                    .collect::<Vec<_>>()
                    .join("; "),
            ),
        })
        .collect();
    let kind = match base {
        MiBase::Fmine => EstimatorKind::MidiffFmine,
        _ => EstimatorKind::Midiffgan,
    };
    EstimateReport::from_runs(kind, runs)
}
