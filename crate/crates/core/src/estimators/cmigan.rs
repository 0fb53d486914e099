//! Joint min-max training of a conditional generator `G(noise, z) ~ Q(y|z)`
//! and a regression network `R(x, y, z)`.
//!
//! `R` maximizes the Donsker-Varadhan objective between real tuples
//! `(x, y, z)` and generated tuples `(x, G(noise, z), z)`; `G` minimizes it.
//! At the saddle point the generator reproduces `P(y|z)` and the objective
//! equals `I(X;Y|Z)`. With no `z` columns the same loop estimates `I(X;Y)`.

use ndarray::{s, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::report::{EstimateReport, RunDiagnostics, TracePoint};
use super::train::{as_column, ensure_finite, gaussian_noise, generator_input, scores, BatchSampler};
use super::{EstimatorConfig, EstimatorKind};
use crate::bounds::{dv_objective, gen_loss_grad, reg_loss_grad, ScorePair};
use crate::error::{Error, Result};
use crate::neuralnet::{lr_at, Mlp, MlpSpec, RmsPropState};
use crate::sample::{Dims, SampleSet};

/// Conditional mutual information `I(X;Y|Z)`; requires `dz >= 1`.
pub fn cmi_gan_estimate(s: &SampleSet, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    if s.dims().dz == 0 {
        return Err(Error::Dimension("C-MI-GAN needs a conditioning block (dz >= 1)".into()));
    }
    estimate(s, cfg, EstimatorKind::Cmigan)
}

/// Mutual information `I(X;Y)`; requires `dz == 0`.
pub fn mi_gan_estimate(s: &SampleSet, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    if s.dims().dz != 0 {
        return Err(Error::Dimension("MI-GAN expects dz == 0".into()));
    }
    estimate(s, cfg, EstimatorKind::Migan)
}

fn estimate(s: &SampleSet, cfg: &EstimatorConfig, kind: EstimatorKind) -> Result<EstimateReport> {
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
    EstimateReport::from_runs(kind, runs)
}

struct Layout {
    dims: Dims,
    noise: usize,
}

impl Layout {
    fn y_cols(&self) -> std::ops::Range<usize> {
        self.dims.dx..self.dims.dx + self.dims.dy
    }

    fn z_cols(&self) -> std::ops::Range<usize> {
        self.dims.dx + self.dims.dy..self.dims.total()
    }

    /// Real tuples with the y block replaced by generator samples.
    fn product(
        &self,
        gen: &Mlp,
        joint: &Array2<f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Array2<f64>, crate::neuralnet::ForwardCache)> {
        let noise = gaussian_noise(rng, joint.nrows(), self.noise);
        let input = generator_input(noise, joint.slice(s![.., self.z_cols()]))?;
        let cache = gen.forward_cached(input.view())?;
        let mut product = joint.clone();
        product
            .slice_mut(s![.., self.y_cols()])
            .assign(cache.output());
        Ok((product, cache))
    }
}

fn train_run(
    data: &Array2<f64>,
    dims: Dims,
    cfg: &EstimatorConfig,
    run: usize,
    seed: u64,
) -> Result<RunDiagnostics> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = Layout {
        dims,
        noise: cfg.noise_dim.unwrap_or(dims.dy),
    };
    let reg_spec = MlpSpec::new(dims.total(), cfg.reg_hidden.clone(), 1)?;
    let gen_spec = MlpSpec::new(layout.noise + dims.dz, cfg.gen_hidden.clone(), dims.dy)?;
    let mut reg = Mlp::init_with_rng(reg_spec, &mut rng)?;
    let mut gen = Mlp::init_with_rng(gen_spec, &mut rng)?;
    let mut reg_opt = RmsPropState::new(reg.params());
    let mut gen_opt = RmsPropState::new(gen.params());
    let schedule = cfg.run_schedule();
    let mut sampler = BatchSampler::new(data.nrows());

    let mut last_reg_loss = f64::NAN;
    let mut last_gen_loss = f64::NAN;
    let mut trace = Vec::new();

    for step in 0..cfg.training_steps {
        let lr = lr_at(step, &schedule);
        let mut last_joint = None;
        for _ in 0..cfg.reg_training_ratio {
            let idx = sampler.draw(cfg.batch_size, &mut rng);
            let joint = data.select(Axis(0), &idx);
            let (product, _) = layout.product(&gen, &joint, &mut rng)?;
            let cj = reg.forward_cached(joint.view())?;
            let cp = reg.forward_cached(product.view())?;
            let lg = reg_loss_grad(&scores(cj.output()), &scores(cp.output()));
            ensure_finite("regressor loss", step, lg.loss)?;
            let mut grads = reg.backward(&cj, as_column(lg.d_joint).view())?;
            grads.add_assign(&reg.backward(&cp, as_column(lg.d_product).view())?)?;
            reg_opt.step(reg.params_mut(), &grads, lr)?;
            last_reg_loss = lg.loss;
            last_joint = Some(joint);
        }

        // Generator step on the last batch with fresh noise.
        let joint = last_joint.expect("reg_training_ratio >= 1");
        let (product, gen_cache) = layout.product(&gen, &joint, &mut rng)?;
        let cp = reg.forward_cached(product.view())?;
        let (gl, d_scores) = gen_loss_grad(&scores(cp.output()));
        ensure_finite("generator loss", step, gl)?;
        let d_input = reg.input_gradient(&cp, as_column(d_scores).view())?;
        let d_y = d_input.slice(s![.., layout.y_cols()]);
        let gen_grads = gen.backward(&gen_cache, d_y)?;
        gen_opt.step(gen.params_mut(), &gen_grads, lr)?;
        last_gen_loss = gl;

        if cfg.trace_every > 0 && step % cfg.trace_every == 0 {
            trace.push(TracePoint {
                step,
                lr,
                reg_loss: last_reg_loss,
                gen_loss: Some(gl),
            });
        }
    }

    let estimate = evaluate(&reg, &gen, &layout, data, cfg.eval_passes, &mut rng)?;
    log::debug!("run {run} (seed {seed}): estimate {estimate:.5}");
    Ok(RunDiagnostics {
        run,
        seed,
        estimate: Some(estimate),
        failure: None,
        final_reg_loss: Some(last_reg_loss),
        final_gen_loss: Some(last_gen_loss),
        last_batch_estimate: Some(-last_reg_loss),
        lr_initial: lr_at(0, &schedule),
        lr_final: lr_at(cfg.training_steps - 1, &schedule),
        clamp_warnings: 0,
        trace,
    })
}

/// DV objective over the whole dataset, averaged over independent noise draws.
fn evaluate(
    reg: &Mlp,
    gen: &Mlp,
    layout: &Layout,
    data: &Array2<f64>,
    passes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let joint_scores = scores(&reg.forward(data.view())?);
    let mut total = 0.0;
    for _ in 0..passes {
        let (product, _) = layout.product(gen, data, rng)?;
        let product_scores = scores(&reg.forward(product.view())?);
        total += dv_objective(&ScorePair::new(joint_scores.clone(), product_scores)?);
    }
    let est = total / passes as f64;
    ensure_finite("final estimate", 0, est)?;
    Ok(est)
}
