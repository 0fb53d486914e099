//! CMI as a difference of two adversarial MI objectives sharing one generator.
//!
//! A generator produces `Q(x)` from noise alone. Regressor `R1` separates
//! `(x, y, z)` from `(q, y, z)` and `R2` separates `(x, z)` from `(q, z)`.
//! Both regressors maximize their DV objectives; the generator minimizes
//! `obj1 - obj2`, and the final difference estimates `I(X;YZ) - I(X;Z)`.

use ndarray::{concatenate, s, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::report::{EstimateReport, RunDiagnostics, TracePoint};
use super::train::{as_column, ensure_finite, gaussian_noise, scores, BatchSampler};
use super::{EstimatorConfig, EstimatorKind};
use crate::bounds::{dv_objective, log_mean_exp, reg_loss_grad, softmax, ScorePair};
use crate::error::{Error, Result};
use crate::neuralnet::{lr_at, ForwardCache, Mlp, MlpSpec, RmsPropState};
use crate::sample::{Dims, SampleSet};

pub fn mi_diff_gan_estimate(s: &SampleSet, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    if s.dims().dz == 0 {
        return Err(Error::Dimension("MI-Diff-GAN needs a conditioning block (dz >= 1)".into()));
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
    EstimateReport::from_runs(EstimatorKind::Midiffgan, runs)
}

/// `[x | z]` view of a `[x | y | z]` batch.
fn drop_y(batch: &Array2<f64>, dims: Dims) -> Array2<f64> {
    concatenate(
        Axis(1),
        &[
            batch.slice(s![.., ..dims.dx]),
            batch.slice(s![.., dims.dx + dims.dy..]),
        ],
    )
    .expect("same row count")
}

struct Products {
    full: Array2<f64>,
    reduced: Array2<f64>,
    gen_cache: ForwardCache,
}

fn products(gen: &Mlp, joint: &Array2<f64>, dims: Dims, noise_dim: usize, rng: &mut ChaCha8Rng) -> Result<Products> {
    let noise = gaussian_noise(rng, joint.nrows(), noise_dim);
    let gen_cache = gen.forward_cached(noise.view())?;
    let mut full = joint.clone();
    full.slice_mut(s![.., ..dims.dx]).assign(gen_cache.output());
    let reduced = drop_y(&full, dims);
    Ok(Products {
        full,
        reduced,
        gen_cache,
    })
}

fn regressor_step(
    reg: &mut Mlp,
    opt: &mut RmsPropState,
    joint: &Array2<f64>,
    product: &Array2<f64>,
    lr: f64,
    step: u64,
) -> Result<f64> {
    let cj = reg.forward_cached(joint.view())?;
    let cp = reg.forward_cached(product.view())?;
    let lg = reg_loss_grad(&scores(cj.output()), &scores(cp.output()));
    ensure_finite("regressor loss", step, lg.loss)?;
    let mut grads = reg.backward(&cj, as_column(lg.d_joint).view())?;
    grads.add_assign(&reg.backward(&cp, as_column(lg.d_product).view())?)?;
    opt.step(reg.params_mut(), &grads, lr)?;
    Ok(lg.loss)
}

fn train_run(
    data: &Array2<f64>,
    dims: Dims,
    cfg: &EstimatorConfig,
    run: usize,
    seed: u64,
) -> Result<RunDiagnostics> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_dim = cfg.noise_dim.unwrap_or(dims.dx);
    let mut reg_full = Mlp::init_with_rng(MlpSpec::new(dims.total(), cfg.reg_hidden.clone(), 1)?, &mut rng)?;
    let mut reg_red = Mlp::init_with_rng(MlpSpec::new(dims.dx + dims.dz, cfg.reg_hidden.clone(), 1)?, &mut rng)?;
    let mut gen = Mlp::init_with_rng(MlpSpec::new(noise_dim, cfg.gen_hidden.clone(), dims.dx)?, &mut rng)?;
    let mut opt_full = RmsPropState::new(reg_full.params());
    let mut opt_red = RmsPropState::new(reg_red.params());
    let mut opt_gen = RmsPropState::new(gen.params());
    let schedule = cfg.run_schedule();
    let mut sampler = BatchSampler::new(data.nrows());

    let (mut loss_full, mut loss_red, mut last_gen) = (f64::NAN, f64::NAN, f64::NAN);
    let mut trace = Vec::new();

    for step in 0..cfg.training_steps {
        let lr = lr_at(step, &schedule);
        let mut last_joint = None;
        for _ in 0..cfg.reg_training_ratio {
            let idx = sampler.draw(cfg.batch_size, &mut rng);
            let joint = data.select(Axis(0), &idx);
            let p = products(&gen, &joint, dims, noise_dim, &mut rng)?;
            loss_full = regressor_step(&mut reg_full, &mut opt_full, &joint, &p.full, lr, step)?;
            loss_red = regressor_step(&mut reg_red, &mut opt_red, &drop_y(&joint, dims), &p.reduced, lr, step)?;
            last_joint = Some(joint);
        }

        // The generator only enters the two partition terms:
        // obj1 - obj2 = ... - lme(R1(q,y,z)) + lme(R2(q,z)).
        let joint = last_joint.expect("reg_training_ratio >= 1");
        let p = products(&gen, &joint, dims, noise_dim, &mut rng)?;
        let c_full = reg_full.forward_cached(p.full.view())?;
        let c_red = reg_red.forward_cached(p.reduced.view())?;
        let s_full = scores(c_full.output());
        let s_red = scores(c_red.output());
        let gen_obj = -log_mean_exp(&s_full) + log_mean_exp(&s_red);
        ensure_finite("generator objective", step, gen_obj)?;
        let d_full: Vec<f64> = softmax(&s_full).into_iter().map(|w| -w).collect();
        let d_red = softmax(&s_red);
        let g_full = reg_full.input_gradient(&c_full, as_column(d_full).view())?;
        let g_red = reg_red.input_gradient(&c_red, as_column(d_red).view())?;
        let d_q = &g_full.slice(s![.., ..dims.dx]) + &g_red.slice(s![.., ..dims.dx]);
        let grads = gen.backward(&p.gen_cache, d_q.view())?;
        opt_gen.step(gen.params_mut(), &grads, lr)?;
        last_gen = gen_obj;

        if cfg.trace_every > 0 && step % cfg.trace_every == 0 {
            trace.push(TracePoint {
                step,
                lr,
                reg_loss: loss_full + loss_red,
                gen_loss: Some(gen_obj),
            });
        }
    }

    let estimate = evaluate(&reg_full, &reg_red, &gen, data, dims, noise_dim, cfg.eval_passes, &mut rng)?;
    Ok(RunDiagnostics {
        run,
        seed,
        estimate: Some(estimate),
        failure: None,
        final_reg_loss: Some(loss_full),
        final_gen_loss: Some(last_gen),
        // -L1 - (-L2) on the last batch
        last_batch_estimate: Some(loss_red - loss_full),
        lr_initial: lr_at(0, &schedule),
        lr_final: lr_at(cfg.training_steps - 1, &schedule),
        clamp_warnings: 0,
        trace,
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    reg_full: &Mlp,
    reg_red: &Mlp,
    gen: &Mlp,
    data: &Array2<f64>,
    dims: Dims,
    noise_dim: usize,
    passes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let sj_full = scores(&reg_full.forward(data.view())?);
    let sj_red = scores(&reg_red.forward(drop_y(data, dims).view())?);
    let mut total = 0.0;
    for _ in 0..passes {
        let p = products(gen, data, dims, noise_dim, rng)?;
        let sp_full = scores(&reg_full.forward(p.full.view())?);
        let sp_red = scores(&reg_red.forward(p.reduced.view())?);
        total += dv_objective(&ScorePair::new(sj_full.clone(), sp_full)?)
            - dv_objective(&ScorePair::new(sj_red.clone(), sp_red)?);
    }
    let est = total / passes as f64;
    ensure_finite("final estimate", 0, est)?;
    Ok(est)
}
