//! Variational divergence objectives and the training losses built on them.
//!
//! Scores are the regressor's outputs on two sample sets: draws from the joint
//! distribution and draws from the product (or generator-based) distribution.
//! Every expectation is a plain mean over the batch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest exponent argument `fdiv_objective` will evaluate.
pub const FDIV_EXP_CLAMP: f64 = 80.0;

/// Regressor scores on joint samples and on product samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    joint: Vec<f64>,
    product: Vec<f64>,
}

impl ScorePair {
    pub fn new(joint: Vec<f64>, product: Vec<f64>) -> Result<Self> {
        check_scores("joint", &joint)?;
        check_scores("product", &product)?;
        Ok(Self { joint, product })
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn product(&self) -> &[f64] {
        &self.product
    }
}

fn check_scores(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidInput(format!("{name} scores are empty")));
    }
    if !v.iter().all(|s| s.is_finite()) {
        return Err(Error::NonFinite(format!("{name} scores contain NaN/Inf")));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `log(mean(exp(v)))`, stabilized by subtracting the maximum.
///
/// Panics on an empty slice.
pub fn log_mean_exp(v: &[f64]) -> f64 {
    assert!(!v.is_empty(), "log_mean_exp of an empty slice");
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|&x| (x - m).exp()).sum();
    m + (s / v.len() as f64).ln()
}

/// Normalized weights `exp(v_i) / sum_j exp(v_j)`: the gradient of
/// [`log_mean_exp`] with respect to each entry.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|&x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Donsker-Varadhan lower bound `E_P[R] - log E_Q[e^R]`.
pub fn dv_objective(p: &ScorePair) -> f64 {
    mean(&p.joint) - log_mean_exp(&p.product)
}

/// f-divergence lower bound `E_P[R] - E_Q[e^(R-1)]`.
pub fn fdiv_objective(p: &ScorePair) -> f64 {
    fdiv_objective_counted(p).0
}

/// [`fdiv_objective`] plus the number of product scores whose exponent hit
/// [`FDIV_EXP_CLAMP`].
pub fn fdiv_objective_counted(p: &ScorePair) -> (f64, usize) {
    let (partition, clamped) = clamped_exp_mean(&p.product);
    (mean(&p.joint) - partition, clamped)
}

fn clamped_exp_mean(v: &[f64]) -> (f64, usize) {
    let mut clamped = 0;
    let s: f64 = v
        .iter()
        .map(|&x| {
            let arg = x - 1.0;
            if arg > FDIV_EXP_CLAMP {
                clamped += 1;
                FDIV_EXP_CLAMP.exp()
            } else {
                arg.exp()
            }
        })
        .sum();
    (s / v.len() as f64, clamped)
}

/// Regressor loss `-E_P[R] + log E_Q[e^R]`, the negated DV objective.
pub fn reg_loss(p: &ScorePair) -> f64 {
    -dv_objective(p)
}

/// Generator loss `-log E_Q[e^R]` over scores of generated tuples.
pub fn gen_loss(product: &[f64]) -> Result<f64> {
    check_scores("product", product)?;
    Ok(-log_mean_exp(product))
}

/// Value and per-score gradients of a loss over a joint/product score pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub d_joint: Vec<f64>,
    pub d_product: Vec<f64>,
    /// Product scores whose exponent was clamped (f-divergence loss only).
    pub clamped: usize,
}

/// [`reg_loss`] with its gradient.
pub fn reg_loss_grad(joint: &[f64], product: &[f64]) -> LossGrad {
    let inv = 1.0 / joint.len() as f64;
    LossGrad {
        loss: -(mean(joint) - log_mean_exp(product)),
        d_joint: vec![-inv; joint.len()],
        d_product: softmax(product),
        clamped: 0,
    }
}

/// Negated f-divergence objective with its gradient. Clamped scores get a
/// zero gradient.
pub fn fdiv_loss_grad(joint: &[f64], product: &[f64]) -> LossGrad {
    let inv_j = 1.0 / joint.len() as f64;
    let inv_p = 1.0 / product.len() as f64;
    let (partition, clamped) = clamped_exp_mean(product);
    let d_product = product
        .iter()
        .map(|&x| {
            let arg = x - 1.0;
            if arg > FDIV_EXP_CLAMP {
                0.0
            } else {
                arg.exp() * inv_p
            }
        })
        .collect();
    LossGrad {
        loss: -(mean(joint) - partition),
        d_joint: vec![-inv_j; joint.len()],
        d_product,
        clamped,
    }
}

/// [`gen_loss`] and its gradient with respect to the product scores.
pub fn gen_loss_grad(product: &[f64]) -> (f64, Vec<f64>) {
    let loss = -log_mean_exp(product);
    let grad = softmax(product).into_iter().map(|w| -w).collect();
    (loss, grad)
}
