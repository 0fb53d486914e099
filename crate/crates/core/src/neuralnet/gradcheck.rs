//! Finite-difference verification of [`Mlp::backward`].
//!
//! Random small networks are evaluated on the scalar loss
//! `L = sum_i <u_i, f(x_i)>` and every analytic gradient entry is compared
//! against a central difference. A ReLU network is piecewise linear in any
//! single parameter, so the central difference is exact up to rounding unless
//! the perturbation moves a pre-activation across zero. Such entries are
//! detected by comparing activation patterns and skipped.

use ndarray::{Array2, ArrayView2};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpSpec};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub networks: usize,
    pub seed: u64,
    pub max_params: usize,
    pub step: f64,
    pub tolerance: f64,
    pub batch_rows: usize,
    /// Test fixture: negate the analytic gradients before comparing.
    pub inject_sign_flip: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            networks: 100,
            seed: 0,
            max_params: 64,
            step: 1e-4,
            tolerance: 1e-4,
            batch_rows: 3,
            inject_sign_flip: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub networks: usize,
    pub entries_checked: usize,
    pub entries_skipped_at_kinks: usize,
    pub max_rel_error: f64,
    /// `(network index, parameter index)` of the worst entry.
    pub worst_entry: Option<(usize, usize)>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Relative error with a small floor so near-zero gradients compare absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn run_gradcheck(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport {
        networks: cfg.networks,
        entries_checked: 0,
        entries_skipped_at_kinks: 0,
        max_rel_error: 0.0,
        worst_entry: None,
        tolerance: cfg.tolerance,
        passed: true,
    };

    for net_idx in 0..cfg.networks {
        let spec = random_spec(&mut rng, cfg.max_params);
        let net = Mlp::init_with_rng(spec.clone(), &mut rng)?;
        // Random biases too, so the check does not rely on zero-bias structure.
        let mut net = net;
        let bias_dist = Uniform::new(-0.5, 0.5);
        for layer in &mut net.params_mut().layers {
            layer.bias.mapv_inplace(|_| bias_dist.sample(&mut rng));
        }
        let x = normal_matrix(&mut rng, cfg.batch_rows, spec.input_dim);
        let upstream = normal_matrix(&mut rng, cfg.batch_rows, spec.output_dim);

        let cache = net.forward_cached(x.view())?;
        let mut analytic: Vec<f64> = net.backward(&cache, upstream.view())?.values().collect();
        if cfg.inject_sign_flip {
            analytic.iter_mut().for_each(|g| *g = -*g);
        }
        let base_pattern = relu_pattern(&net, x.view())?;

        for (p_idx, &a) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            *plus.params_mut().values_mut().nth(p_idx).expect("index") += cfg.step;
            *minus.params_mut().values_mut().nth(p_idx).expect("index") -= cfg.step;

            if relu_pattern(&plus, x.view())? != base_pattern
                || relu_pattern(&minus, x.view())? != base_pattern
            {
                report.entries_skipped_at_kinks += 1;
                continue;
            }
            let lp = loss(&plus, x.view(), upstream.view())?;
            let lm = loss(&minus, x.view(), upstream.view())?;
            let numeric = (lp - lm) / (2.0 * cfg.step);
            let err = relative_error(a, numeric);
            report.entries_checked += 1;
            if err > report.max_rel_error || report.worst_entry.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst_entry = Some((net_idx, p_idx));
            }
        }
    }
    report.passed = report.max_rel_error < cfg.tolerance && report.entries_checked > 0;
    Ok(report)
}

fn random_spec<R: Rng>(rng: &mut R, max_params: usize) -> MlpSpec {
    loop {
        let input = rng.gen_range(1..=4);
        let depth = rng.gen_range(1..=2);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=6)).collect();
        let output = rng.gen_range(1..=3);
        let spec = MlpSpec::new(input, hidden, output).expect("positive widths");
        if spec.parameter_count() <= max_params {
            return spec;
        }
    }
}

fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

fn loss(net: &Mlp, x: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Result<f64> {
    let out = net.forward(x)?;
    Ok((&out * &upstream).sum())
}

/// Sign of every hidden pre-activation, layer by layer.
fn relu_pattern(net: &Mlp, x: ArrayView2<f64>) -> Result<Vec<bool>> {
    let mut pattern = Vec::new();
    let mut act = x.to_owned();
    let layers = &net.params().layers;
    for (l, layer) in layers.iter().enumerate() {
        let mut z = act.dot(&layer.weights);
        z += &layer.bias;
        if l + 1 < layers.len() {
            pattern.extend(z.iter().map(|&v| v > 0.0));
            z.mapv_inplace(|v| v.max(0.0));
        }
        act = z;
    }
    Ok(pattern)
}
