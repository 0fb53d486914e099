//! Seeded synthetic datasets with known (or reference) conditional mutual
//! information.
//!
//! Every generator seeds a [`ChaCha8Rng`] from the 64-bit seed via
//! `SeedableRng::seed_from_u64`, draws the model's fixed parameters first and
//! then the rows in order. `N(m, v)` below always means variance `v`.
//!
//! | model       | columns (x, y, z) | truth |
//! |-------------|-------------------|-------|
//! | `linear1`   | 1, 1, dz          | ½·ln(101) |
//! | `linear2`   | 1, 1, dz          | ½·ln(101) |
//! | `linear3`   | d, d, d           | (d/2)·ln 2 |
//! | `nonlinear` | 1, 1, dz          | KSG on the 1-d projection |
//! | `cit`       | 1, 1, dz          | 0 when independent |
//! | `gauss`     | d, d, 0           | −(d/2)·ln(1−ρ²) |

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::{ground_truth_nonlinear, KsgConfig, KsgEstimate};
use crate::sample::{Dims, SampleSet};

/// Name of the generator algorithm; part of the dataset sidecar contract.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.3, seed_from_u64)";

/// Noise variance in linear models 1 and 2.
const LINEAR12_NOISE_VAR: f64 = 0.01;
/// Variance of X and of the noise in linear model 3.
const LINEAR3_VAR: f64 = 0.25;
const NONLINEAR_NOISE_VAR: f64 = 0.1;
const NONLINEAR_A_XY: f64 = 2.0;
const CIT_NOISE_VAR: f64 = 0.25;

/// Sample count used for the KSG reference value of nonlinear datasets.
pub const NONLINEAR_REFERENCE_N: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Linear1,
    Linear2,
    Linear3,
    Nonlinear,
    Cit,
    Gauss,
}

impl ModelId {
    pub const ALL: [ModelId; 6] = [
        ModelId::Linear1,
        ModelId::Linear2,
        ModelId::Linear3,
        ModelId::Nonlinear,
        ModelId::Cit,
        ModelId::Gauss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Linear1 => "linear1",
            ModelId::Linear2 => "linear2",
            ModelId::Linear3 => "linear3",
            ModelId::Nonlinear => "nonlinear",
            ModelId::Cit => "cit",
            ModelId::Gauss => "gauss",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model `{s}`")))
    }
}

/// Scalar nonlinearity applied in the nonlinear model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transfer {
    Cos,
    Tanh,
    ExpNegAbs,
}

impl Transfer {
    const ALL: [Transfer; 3] = [Transfer::Cos, Transfer::Tanh, Transfer::ExpNegAbs];

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Transfer::Cos => v.cos(),
            Transfer::Tanh => v.tanh(),
            Transfer::ExpNegAbs => (-v.abs()).exp(),
        }
    }
}

/// Per-dataset random draws that are held fixed across rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDraws {
    None,
    /// Linear model 2: `U = w·Z` with `||w||_1 = 1`.
    Linear2 { w: Vec<f64> },
    Nonlinear {
        a_zy: Vec<f64>,
        a_xy: f64,
        f1: Transfer,
        f2: Transfer,
    },
    Cit {
        a_x: Vec<f64>,
        b_y: Vec<f64>,
        c: f64,
        dependent: bool,
    },
    Gauss { rho: f64 },
}

/// Everything needed to regenerate a dataset exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: ModelId,
    pub n: usize,
    pub dims: Dims,
    pub seed: u64,
    pub draws: ModelDraws,
}

fn normal<R: Rng>(rng: &mut R, mean: f64, var: f64) -> f64 {
    let s: f64 = rng.sample(StandardNormal);
    mean + var.sqrt() * s
}

fn unit_l2(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidConfig(msg.into()))
    }
}

fn build(params: ModelParams, data: Array2<f64>) -> Result<(SampleSet, ModelParams)> {
    let set = SampleSet::new(data, params.dims)?;
    Ok((set, params))
}

/// Linear model 1: `X~N(0,1)`, `Z~U(-0.5,0.5)^dz`, `Y = X + e`, `e~N(Z_1, 0.01)`.
pub fn gen_linear1(n: usize, dz: usize, seed: u64) -> Result<(SampleSet, ModelParams)> {
    require(dz >= 1, "linear1 needs dz >= 1")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uz = Uniform::new(-0.5, 0.5);
    let mut data = Array2::zeros((n, 2 + dz));
    for mut row in data.rows_mut() {
        let x = normal(&mut rng, 0.0, 1.0);
        for j in 0..dz {
            row[2 + j] = uz.sample(&mut rng);
        }
        let e = normal(&mut rng, row[2], LINEAR12_NOISE_VAR);
        row[0] = x;
        row[1] = x + e;
    }
    let params = ModelParams {
        model: ModelId::Linear1,
        n,
        dims: Dims::new(1, 1, dz),
        seed,
        draws: ModelDraws::None,
    };
    build(params, data)
}

/// Linear model 2: `Z~N(0,I)`, `U = w·Z` with positive `w`, `||w||_1 = 1`,
/// `Y = X + e`, `e~N(U, 0.01)`.
pub fn gen_linear2(n: usize, dz: usize, seed: u64) -> Result<(SampleSet, ModelParams)> {
    require(dz >= 1, "linear2 needs dz >= 1")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..dz).map(|_| rng.gen_range(f64::EPSILON..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.into_iter().map(|v| v / total).collect();
    let mut data = Array2::zeros((n, 2 + dz));
    let mut z = vec![0.0; dz];
    for mut row in data.rows_mut() {
        let x = normal(&mut rng, 0.0, 1.0);
        z.iter_mut().for_each(|v| *v = normal(&mut rng, 0.0, 1.0));
        let e = normal(&mut rng, dot(&w, &z), LINEAR12_NOISE_VAR);
        row[0] = x;
        row[1] = x + e;
        for (j, &v) in z.iter().enumerate() {
            row[2 + j] = v;
        }
    }
    let params = ModelParams {
        model: ModelId::Linear2,
        n,
        dims: Dims::new(1, 1, dz),
        seed,
        draws: ModelDraws::Linear2 { w },
    };
    build(params, data)
}

/// Linear model 3: `dx = dy = dz = d`, `X~N(0,0.25)^d`, `Z~U(-0.5,0.5)^d`,
/// `Y_i = X_i + e_i` with `e_i~N(Z_1, 0.25)` (every coordinate shares `Z_1`).
pub fn gen_linear3(n: usize, d: usize, seed: u64) -> Result<(SampleSet, ModelParams)> {
    require(d >= 1, "linear3 needs d >= 1")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uz = Uniform::new(-0.5, 0.5);
    let mut data = Array2::zeros((n, 3 * d));
    for mut row in data.rows_mut() {
        for i in 0..d {
            row[i] = normal(&mut rng, 0.0, LINEAR3_VAR);
        }
        for j in 0..d {
            row[2 * d + j] = uz.sample(&mut rng);
        }
        let z1 = row[2 * d];
        for i in 0..d {
            row[d + i] = row[i] + normal(&mut rng, z1, LINEAR3_VAR);
        }
    }
    let params = ModelParams {
        model: ModelId::Linear3,
        n,
        dims: Dims::new(d, d, d),
        seed,
        draws: ModelDraws::None,
    };
    build(params, data)
}

/// Nonlinear model: `Z~N(1,I)`, `X = f1(h1)`, `Y = f2(a_zy·Z + 2X + h2)`,
/// `h~N(0, 0.1)`; `a_zy` has iid standard normal entries scaled to unit norm.
pub fn gen_nonlinear(n: usize, dz: usize, seed: u64) -> Result<(SampleSet, ModelParams)> {
    require(dz >= 1, "nonlinear needs dz >= 1")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_zy = unit_l2((0..dz).map(|_| normal(&mut rng, 0.0, 1.0)).collect());
    let f1 = Transfer::ALL[rng.gen_range(0..3)];
    let f2 = Transfer::ALL[rng.gen_range(0..3)];
    let params = ModelParams {
        model: ModelId::Nonlinear,
        n,
        dims: Dims::new(1, 1, dz),
        seed,
        draws: ModelDraws::Nonlinear {
            a_zy,
            a_xy: NONLINEAR_A_XY,
            f1,
            f2,
        },
    };
    let data = sample_nonlinear(&params, n, &mut rng)?;
    build(params, data)
}

fn sample_nonlinear<R: Rng>(params: &ModelParams, n: usize, rng: &mut R) -> Result<Array2<f64>> {
    let ModelDraws::Nonlinear { a_zy, a_xy, f1, f2 } = &params.draws else {
        return Err(Error::InvalidConfig("not a nonlinear model".into()));
    };
    let dz = a_zy.len();
    let mut data = Array2::zeros((n, 2 + dz));
    let mut z = vec![0.0; dz];
    for mut row in data.rows_mut() {
        z.iter_mut().for_each(|v| *v = normal(rng, 1.0, 1.0));
        let x = f1.apply(normal(rng, 0.0, NONLINEAR_NOISE_VAR));
        let y = f2.apply(dot(a_zy, &z) + a_xy * x + normal(rng, 0.0, NONLINEAR_NOISE_VAR));
        row[0] = x;
        row[1] = y;
        for (j, &v) in z.iter().enumerate() {
            row[2 + j] = v;
        }
    }
    Ok(data)
}

/// Post-nonlinear CI-testing model. `Z~N(1,I)`, `X = cos(a_x·Z + h1)`, and
/// `Y = cos(b_y·Z + h2)` when independent, `cos(c·X + b_y·Z + h2)` otherwise;
/// `h~N(0, 0.25)`, `a_x, b_y ~ U(0,1)^dz` scaled to unit norm, `c~U(0,2)`.
///
/// Returns `dependent` as the label.
pub fn gen_cit(
    n: usize,
    dz: usize,
    dependent: bool,
    seed: u64,
) -> Result<(SampleSet, ModelParams, bool)> {
    require(dz >= 1, "cit needs dz >= 1")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u01 = Uniform::new(f64::EPSILON, 1.0);
    let a_x = unit_l2((0..dz).map(|_| u01.sample(&mut rng)).collect());
    let b_y = unit_l2((0..dz).map(|_| u01.sample(&mut rng)).collect());
    let c = rng.gen_range(0.0..2.0);
    let mut data = Array2::zeros((n, 2 + dz));
    let mut z = vec![0.0; dz];
    for mut row in data.rows_mut() {
        z.iter_mut().for_each(|v| *v = normal(&mut rng, 1.0, 1.0));
        let x = (dot(&a_x, &z) + normal(&mut rng, 0.0, CIT_NOISE_VAR)).cos();
        let coupling = if dependent { c * x } else { 0.0 };
        let y = (coupling + dot(&b_y, &z) + normal(&mut rng, 0.0, CIT_NOISE_VAR)).cos();
        row[0] = x;
        row[1] = y;
        for (j, &v) in z.iter().enumerate() {
            row[2 + j] = v;
        }
    }
    let params = ModelParams {
        model: ModelId::Cit,
        n,
        dims: Dims::new(1, 1, dz),
        seed,
        draws: ModelDraws::Cit {
            a_x,
            b_y,
            c,
            dependent,
        },
    };
    let (set, params) = build(params, data)?;
    Ok((set, params, dependent))
}

/// `d` independent pairs `(X_i, Y_i)`, each bivariate normal with unit
/// variances and correlation `rho`.
pub fn gen_gauss(n: usize, d: usize, rho: f64, seed: u64) -> Result<(SampleSet, ModelParams)> {
    require(d >= 1, "gauss needs d >= 1")?;
    require(rho.abs() < 1.0, "gauss needs |rho| < 1")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (1.0 - rho * rho).sqrt();
    let mut data = Array2::zeros((n, 2 * d));
    for mut row in data.rows_mut() {
        for i in 0..d {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            row[i] = a;
            row[d + i] = rho * a + s * b;
        }
    }
    let params = ModelParams {
        model: ModelId::Gauss,
        n,
        dims: Dims::new(d, d, 0),
        seed,
        draws: ModelDraws::Gauss { rho },
    };
    build(params, data)
}

/// Request for one generated dataset, as accepted on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub model: ModelId,
    pub n: usize,
    /// `dz` for linear1/linear2/nonlinear/cit, `d` for linear3/gauss.
    pub dim: usize,
    pub seed: u64,
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub dependent: bool,
}

pub fn generate(spec: &GenSpec) -> Result<(SampleSet, ModelParams)> {
    match spec.model {
        ModelId::Linear1 => gen_linear1(spec.n, spec.dim, spec.seed),
        ModelId::Linear2 => gen_linear2(spec.n, spec.dim, spec.seed),
        ModelId::Linear3 => gen_linear3(spec.n, spec.dim, spec.seed),
        ModelId::Nonlinear => gen_nonlinear(spec.n, spec.dim, spec.seed),
        ModelId::Cit => gen_cit(spec.n, spec.dim, spec.dependent, spec.seed).map(|(s, p, _)| (s, p)),
        ModelId::Gauss => gen_gauss(spec.n, spec.dim, spec.rho, spec.seed),
    }
}

/// Regenerate the dataset described by `params`.
pub fn regenerate(params: &ModelParams) -> Result<SampleSet> {
    let (dim, rho, dependent) = match &params.draws {
        ModelDraws::Gauss { rho } => (params.dims.dx, *rho, false),
        ModelDraws::Cit { dependent, .. } => (params.dims.dz, 0.0, *dependent),
        _ if params.model == ModelId::Linear3 => (params.dims.dx, 0.0, false),
        _ => (params.dims.dz, 0.0, false),
    };
    let (set, regenerated) = generate(&GenSpec {
        model: params.model,
        n: params.n,
        dim,
        seed: params.seed,
        rho,
        dependent,
    })?;
    if &regenerated != params {
        return Err(Error::InvalidInput(
            "stored model parameters do not match their seed".into(),
        ));
    }
    Ok(set)
}

/// Closed-form CMI (nats) where one exists.
pub fn true_cmi(params: &ModelParams) -> Result<f64> {
    match (&params.model, &params.draws) {
        (ModelId::Linear1 | ModelId::Linear2, _) => {
            Ok(0.5 * (1.0 + 1.0 / LINEAR12_NOISE_VAR).ln())
        }
        (ModelId::Linear3, _) => {
            // signal and noise variances are equal: ½ ln(1 + 1) per coordinate
            Ok(params.dims.dx as f64 / 2.0 * std::f64::consts::LN_2)
        }
        (ModelId::Gauss, ModelDraws::Gauss { rho }) => {
            Ok(-(params.dims.dx as f64) / 2.0 * (1.0 - rho * rho).ln())
        }
        (ModelId::Cit, ModelDraws::Cit { dependent: false, .. }) => Ok(0.0),
        (model, _) => Err(Error::NoClosedForm(model.to_string())),
    }
}

/// KSG reference CMI for a nonlinear dataset: a fresh sample of `n` rows from
/// the same model draws, with `Z` reduced to `a_zy·Z`.
pub fn nonlinear_reference_cmi(params: &ModelParams, n: usize, ksg: &KsgConfig) -> Result<KsgEstimate> {
    let ModelDraws::Nonlinear { a_zy, .. } = &params.draws else {
        return Err(Error::InvalidConfig("reference CMI needs a nonlinear model".into()));
    };
    // separate stream from the dataset itself
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x005E_ED0F_7E57_u64);
    let data = sample_nonlinear(params, n, &mut rng)?;
    let set = SampleSet::new(data, params.dims)?;
    let a = Array1::from_vec(a_zy.clone());
    ground_truth_nonlinear(set.x(), set.y(), set.z(), a.view(), ksg)
}

/// Numerical integration of the conditional-MI integrand for the linear
/// models, as a cross-check on [`true_cmi`].
///
/// Given the conditioning value, each channel is `Y = X + E` with
/// `X~N(0, vx)`, `E~N(m, ve)`, so the integrand over `(x, e = y - x)` is
/// `N(x;0,vx) N(e;m,ve) log[N(e;m,ve) / N(x+e; m, vx+ve)]`. The inner 2-d
/// integral uses the trapezoid rule over ±8 standard deviations with `nodes`
/// points per axis; the outer average over the conditioning mean uses the
/// midpoint rule with `z_nodes` points.
pub fn quadrature_cmi(params: &ModelParams, nodes: usize, z_nodes: usize) -> Result<f64> {
    require(nodes >= 3 && z_nodes >= 1, "quadrature needs nodes >= 3 and z_nodes >= 1")?;
    let (vx, ve, channels) = match params.model {
        ModelId::Linear1 | ModelId::Linear2 => (1.0, LINEAR12_NOISE_VAR, 1),
        ModelId::Linear3 => (LINEAR3_VAR, LINEAR3_VAR, params.dims.dx),
        other => return Err(Error::NoClosedForm(other.to_string())),
    };
    // conditioning means and their weights
    let means: Vec<(f64, f64)> = match &params.draws {
        ModelDraws::Linear2 { w } => {
            // U = w·Z ~ N(0, ||w||²); midpoint rule on ±6 sd
            let sd = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            let width = 12.0 * sd / z_nodes as f64;
            let pts: Vec<(f64, f64)> = (0..z_nodes)
                .map(|i| {
                    let u = -6.0 * sd + (i as f64 + 0.5) * width;
                    (u, gauss_pdf(u, 0.0, sd * sd) * width)
                })
                .collect();
            let total: f64 = pts.iter().map(|p| p.1).sum();
            pts.into_iter().map(|(u, w)| (u, w / total)).collect()
        }
        _ => (0..z_nodes)
            .map(|i| (-0.5 + (i as f64 + 0.5) / z_nodes as f64, 1.0 / z_nodes as f64))
            .collect(),
    };
    let per_channel: f64 = means
        .iter()
        .map(|&(m, weight)| weight * channel_integral(vx, ve, m, nodes))
        .sum();
    Ok(channels as f64 * per_channel)
}

fn gauss_pdf(v: f64, mean: f64, var: f64) -> f64 {
    (-(v - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn trapezoid_axis(center: f64, sd: f64, nodes: usize) -> Vec<(f64, f64)> {
    let lo = center - 8.0 * sd;
    let h = 16.0 * sd / (nodes - 1) as f64;
    (0..nodes)
        .map(|i| {
            let w = if i == 0 || i == nodes - 1 { h / 2.0 } else { h };
            (lo + i as f64 * h, w)
        })
        .collect()
}

fn channel_integral(vx: f64, ve: f64, m: f64, nodes: usize) -> f64 {
    let xs = trapezoid_axis(0.0, vx.sqrt(), nodes);
    let es = trapezoid_axis(m, ve.sqrt(), nodes);
    let mut acc = 0.0;
    for &(x, wx) in &xs {
        let px = gauss_pdf(x, 0.0, vx);
        for &(e, we) in &es {
            let pe = gauss_pdf(e, m, ve);
            let py = gauss_pdf(x + e, m, vx + ve);
            if px > 0.0 && pe > 0.0 && py > 0.0 {
                acc += wx * we * px * pe * (pe / py).ln();
            }
        }
    }
    acc
}

/// `||v||_1` and `||v||_2` helpers for checking stored draws.
pub fn l1_norm(v: ArrayView1<f64>) -> f64 {
    v.iter().map(|a| a.abs()).sum()
}

pub fn l2_norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}
