//! MINE-style MI estimation with the f-divergence objective
//! `E_P[R] - E_Q[e^(R-1)]`, where product samples come from shuffling the
//! y block within a batch. Plain batch gradients; no moving-average
//! correction of the partition term.

use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::report::{EstimateReport, RunDiagnostics, TracePoint};
use super::train::{as_column, ensure_finite, scores, BatchSampler};
use super::{EstimatorConfig, EstimatorKind};
use crate::bounds::{fdiv_loss_grad, fdiv_objective_counted, ScorePair};
use crate::error::{Error, Result};
use crate::neuralnet::{lr_at, Mlp, MlpSpec, RmsPropState};
use crate::sample::{Dims, SampleSet};

pub fn f_mine_mi_estimate(s: &SampleSet, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    if s.dims().dz != 0 {
        return Err(Error::Dimension("f-MINE expects dz == 0".into()));
    }
    cfg.validate(s.n())?;
    let data = if cfg.standardize {
        s.standardized()
    } else {
        s.clone()
    };
    let runs: Vec<RunDiagnostics> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let seed = cfg.run_seed(run);
            train_run(data.data(), data.dims(), cfg, run, seed)
                .unwrap_or_else(|e| RunDiagnostics::failed(run, seed, e.to_string()))
        })
        .collect();
    EstimateReport::from_runs(EstimatorKind::Fmine, runs)
}

/// The batch with its y block rows shuffled, breaking the x-y pairing.
fn shuffled_product(joint: &Array2<f64>, dims: Dims, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut order: Vec<usize> = (0..joint.nrows()).collect();
    order.shuffle(rng);
    let ys = joint.slice(s![.., dims.dx..]).select(Axis(0), &order);
    let mut product = joint.clone();
    product.slice_mut(s![.., dims.dx..]).assign(&ys);
    product
}

fn train_run(
    data: &Array2<f64>,
    dims: Dims,
    cfg: &EstimatorConfig,
    run: usize,
    seed: u64,
) -> Result<RunDiagnostics> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reg = Mlp::init_with_rng(MlpSpec::new(dims.total(), cfg.reg_hidden.clone(), 1)?, &mut rng)?;
    let mut opt = RmsPropState::new(reg.params());
    let schedule = cfg.run_schedule();
    let mut sampler = BatchSampler::new(data.nrows());
    let mut last_loss = f64::NAN;
    let mut clamps = 0;
    let mut trace = Vec::new();

    for step in 0..cfg.training_steps {
        let lr = lr_at(step, &schedule);
        let idx = sampler.draw(cfg.batch_size, &mut rng);
        let joint = data.select(Axis(0), &idx);
        let product = shuffled_product(&joint, dims, &mut rng);
        let cj = reg.forward_cached(joint.view())?;
        let cp = reg.forward_cached(product.view())?;
        let lg = fdiv_loss_grad(&scores(cj.output()), &scores(cp.output()));
        ensure_finite("f-divergence loss", step, lg.loss)?;
        clamps += lg.clamped;
        let mut grads = reg.backward(&cj, as_column(lg.d_joint).view())?;
        grads.add_assign(&reg.backward(&cp, as_column(lg.d_product).view())?)?;
        opt.step(reg.params_mut(), &grads, lr)?;
        last_loss = lg.loss;
        if cfg.trace_every > 0 && step % cfg.trace_every == 0 {
            trace.push(TracePoint {
                step,
                lr,
                reg_loss: lg.loss,
                gen_loss: None,
            });
        }
    }
    if clamps > 0 {
        log::warn!("run {run}: f-divergence exponent clamped {clamps} times");
    }

    let joint_scores = scores(&reg.forward(data.view())?);
    let mut total = 0.0;
    for _ in 0..cfg.eval_passes {
        let product = shuffled_product(data, dims, &mut rng);
        let ps = scores(&reg.forward(product.view())?);
        let (v, c) = fdiv_objective_counted(&ScorePair::new(joint_scores.clone(), ps)?);
        clamps += c;
        total += v;
    }
    let estimate = total / cfg.eval_passes as f64;
    ensure_finite("final estimate", 0, estimate)?;
    Ok(RunDiagnostics {
        run,
        seed,
        estimate: Some(estimate),
        failure: None,
        final_reg_loss: Some(last_loss),
        final_gen_loss: None,
        last_batch_estimate: Some(-last_loss),
        lr_initial: lr_at(0, &schedule),
        lr_final: lr_at(cfg.training_steps - 1, &schedule),
        clamp_warnings: clamps,
        trace,
    })
}
