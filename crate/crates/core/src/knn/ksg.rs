//! Kraskov-Stögbauer-Grassberger estimator (variant 1) of mutual information,
//! and conditional mutual information as a difference of two such estimates.

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use super::kdtree::KdTree;
use crate::error::{Error, Result};

/// Half-width of the uniform jitter added when duplicate points collapse a
/// neighbor distance to zero.
pub const JITTER_AMPLITUDE: f64 = 1e-10;

/// Fraction of points whose marginal neighborhoods equal the joint one above
/// which an estimate is flagged degenerate.
const DEGENERACY_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KsgConfig {
    pub k: usize,
    /// Seed for the duplicate-breaking jitter.
    pub jitter_seed: u64,
}

impl Default for KsgConfig {
    fn default() -> Self {
        Self {
            k: 5,
            jitter_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsgEstimate {
    /// Estimate in nats.
    pub value: f64,
    /// Duplicate points were jittered apart before estimating.
    pub jittered: bool,
    /// Nearly every point's marginal neighborhoods coincide with its joint
    /// neighborhood, i.e. one block determines the other.
    pub degenerate: bool,
}

/// Per-point neighbor statistics behind a KSG estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborStat {
    /// Max-norm distance to the k-th joint-space neighbor.
    pub eps: f64,
    /// Marginal x points (other than this one) strictly closer than `eps`.
    pub nx: usize,
    pub ny: usize,
}

fn validate(x: &ArrayView2<f64>, y: &ArrayView2<f64>, k: usize) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "x has {} rows, y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::Dimension("x and y need at least one column".into()));
    }
    if k == 0 || x.nrows() <= k {
        return Err(Error::InvalidConfig(format!(
            "KSG needs 1 <= k < n (k = {k}, n = {})",
            x.nrows()
        )));
    }
    if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("KSG input contains NaN/Inf".into()));
    }
    Ok(())
}

/// Joint k-th neighbor distance and strict marginal counts for every point.
pub fn neighbor_stats(x: ArrayView2<f64>, y: ArrayView2<f64>, k: usize) -> Result<Vec<NeighborStat>> {
    validate(&x, &y, k)?;
    let joint = concatenate(Axis(1), &[x.view(), y.view()])
        .map_err(|e| Error::Dimension(e.to_string()))?
        .as_standard_layout()
        .into_owned();
    let joint_tree = KdTree::build(joint.view());
    let x_tree = KdTree::build(x);
    let y_tree = KdTree::build(y);
    let stats = (0..joint.nrows())
        .into_par_iter()
        .map(|i| {
            let q = joint.row(i);
            let q = q.as_slice().expect("standard layout");
            let eps = joint_tree.kth_distance(q, k, Some(i));
            let xi = x.row(i).to_vec();
            let yi = y.row(i).to_vec();
            // the query point sits at distance 0 and is counted when eps > 0
            let self_hit = usize::from(eps > 0.0);
            NeighborStat {
                eps,
                nx: x_tree.count_within(&xi, eps) - self_hit,
                ny: y_tree.count_within(&yi, eps) - self_hit,
            }
        })
        .collect();
    Ok(stats)
}

fn estimate_from_stats(stats: &[NeighborStat], k: usize) -> f64 {
    let n = stats.len();
    let avg = stats
        .iter()
        .map(|s| digamma((s.nx + 1) as f64) + digamma((s.ny + 1) as f64))
        .sum::<f64>()
        / n as f64;
    digamma(k as f64) + digamma(n as f64) - avg
}

fn jitter(m: ArrayView2<f64>, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let dist = Uniform::new_inclusive(-JITTER_AMPLITUDE, JITTER_AMPLITUDE);
    let mut out = m.to_owned();
    out.mapv_inplace(|v| v + dist.sample(rng));
    out
}

/// KSG estimator 1: `psi(k) + psi(n) - <psi(n_x+1) + psi(n_y+1)>`.
pub fn ksg_mi(x: ArrayView2<f64>, y: ArrayView2<f64>, cfg: &KsgConfig) -> Result<KsgEstimate> {
    let mut stats = neighbor_stats(x, y, cfg.k)?;
    let mut jittered = false;
    if stats.iter().any(|s| s.eps == 0.0) {
        log::warn!("KSG: duplicate points collapse neighbor distances; jittering");
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.jitter_seed);
        let xj = jitter(x, &mut rng);
        let yj = jitter(y, &mut rng);
        stats = neighbor_stats(xj.view(), yj.view(), cfg.k)?;
        jittered = true;
    }
    let minimal = stats
        .iter()
        .filter(|s| s.nx + 1 == cfg.k && s.ny + 1 == cfg.k)
        .count();
    let degenerate = minimal as f64 >= DEGENERACY_FRACTION * stats.len() as f64;
    if degenerate {
        log::warn!("KSG: marginal neighborhoods match the joint one; dependence is near-deterministic");
    }
    Ok(KsgEstimate {
        value: estimate_from_stats(&stats, cfg.k),
        jittered,
        degenerate,
    })
}

/// `I(X;Y|Z) = I(X;(Y,Z)) - I(X;Z)` with a shared `k`.
pub fn ksg_cmi(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    z: ArrayView2<f64>,
    cfg: &KsgConfig,
) -> Result<KsgEstimate> {
    if z.ncols() == 0 {
        return Err(Error::Dimension("conditioning block z is empty".into()));
    }
    if y.nrows() != z.nrows() {
        return Err(Error::Dimension("y and z have different row counts".into()));
    }
    let yz = concatenate(Axis(1), &[y.view(), z.view()]).map_err(|e| Error::Dimension(e.to_string()))?;
    let full = ksg_mi(x, yz.view(), cfg)?;
    let marginal = ksg_mi(x, z, cfg)?;
    Ok(KsgEstimate {
        value: full.value - marginal.value,
        jittered: full.jittered || marginal.jittered,
        degenerate: full.degenerate || marginal.degenerate,
    })
}

/// CMI given the one-dimensional projection `u = z · a_zy`.
///
/// When `y` depends on `z` only through that projection, `I(X;Y|Z) = I(X;Y|U)`
/// and the low-dimensional KSG estimate serves as a reference value.
pub fn ground_truth_nonlinear(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    z: ArrayView2<f64>,
    a_zy: ArrayView1<f64>,
    cfg: &KsgConfig,
) -> Result<KsgEstimate> {
    if a_zy.len() != z.ncols() {
        return Err(Error::Dimension(format!(
            "projection has length {}, z has {} columns",
            a_zy.len(),
            z.ncols()
        )));
    }
    let norm = a_zy.dot(&a_zy).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "projection vector must have unit l2 norm (got {norm})"
        )));
    }
    let u: Array1<f64> = z.dot(&a_zy);
    let u = u.insert_axis(Axis(1));
    ksg_cmi(x, y, u.view(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian_pair(n: usize, rho: f64, seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 1));
        let mut y = Array2::zeros((n, 1));
        for i in 0..n {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            x[[i, 0]] = a;
            y[[i, 0]] = rho * a + (1.0 - rho * rho).sqrt() * b;
        }
        (x, y)
    }

    #[test]
    fn correlated_gaussian() {
        let (x, y) = gaussian_pair(10_000, 0.9, 3);
        let est = ksg_mi(x.view(), y.view(), &KsgConfig::default()).unwrap();
        assert!((est.value - 0.83037).abs() < 0.05, "{}", est.value);
        assert!(!est.degenerate && !est.jittered);
    }

    #[test]
    fn independent_uniforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((2000, 1), |_| rng.gen::<f64>());
        let y = Array2::from_shape_fn((2000, 1), |_| rng.gen::<f64>());
        let est = ksg_mi(x.view(), y.view(), &KsgConfig::default()).unwrap();
        assert!(est.value.abs() < 0.05, "{}", est.value);
    }

    #[test]
    fn deterministic_copy_is_large_and_flagged() {
        let (x, _) = gaussian_pair(10_000, 0.0, 9);
        let est = ksg_mi(x.view(), x.view(), &KsgConfig::default()).unwrap();
        assert!(est.value > 3.0, "{}", est.value);
        assert!(est.degenerate);
    }

    #[test]
    fn duplicates_trigger_jitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((500, 1), |_| f64::from(rng.gen_range(0..4)));
        let y = Array2::from_shape_fn((500, 1), |_| f64::from(rng.gen_range(0..4)));
        let est = ksg_mi(x.view(), y.view(), &KsgConfig::default()).unwrap();
        assert!(est.jittered);
        assert!(est.value.is_finite());
    }

    #[test]
    fn rejects_bad_input() {
        let x = array![[1.0], [2.0], [3.0]];
        let cfg = KsgConfig { k: 3, jitter_seed: 0 };
        assert!(ksg_mi(x.view(), x.view(), &cfg).is_err());
        let y = array![[1.0], [2.0]];
        assert!(ksg_mi(x.view(), y.view(), &KsgConfig { k: 1, jitter_seed: 0 }).is_err());
        let z = Array2::<f64>::zeros((3, 0));
        assert!(ksg_cmi(x.view(), x.view(), z.view(), &KsgConfig { k: 1, jitter_seed: 0 }).is_err());
    }

    #[test]
    fn projection_must_be_unit() {
        let (x, y) = gaussian_pair(200, 0.5, 2);
        let z = Array2::from_elem((200, 2), 1.0);
        let bad = array![1.0, 1.0];
        assert!(ground_truth_nonlinear(x.view(), y.view(), z.view(), bad.view(), &KsgConfig::default()).is_err());
    }

    #[test]
    fn unit_projection_in_one_dimension_is_plain_cmi() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 1500;
        let z = Array2::from_shape_fn((n, 1), |_| rng.sample::<f64, _>(StandardNormal));
        let x = Array2::from_shape_fn((n, 1), |(i, _)| z[[i, 0]] + rng.sample::<f64, _>(StandardNormal));
        let y = Array2::from_shape_fn((n, 1), |(i, _)| z[[i, 0]] + 0.5 * x[[i, 0]] + rng.sample::<f64, _>(StandardNormal));
        let cfg = KsgConfig::default();
        let direct = ksg_cmi(x.view(), y.view(), z.view(), &cfg).unwrap();
        let projected = ground_truth_nonlinear(x.view(), y.view(), z.view(), array![1.0].view(), &cfg).unwrap();
        assert_eq!(direct.value, projected.value);
    }
}
