//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use ndarray::ArrayView2;

/// `P(s+ > s-) + P(s+ = s-)/2` over every positive/negative pair.
pub fn brute_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn max_dist(m: ArrayView2<f64>, i: usize, j: usize) -> f64 {
    m.row(i)
        .iter()
        .zip(m.row(j))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// `(eps, nx, ny)` per point by exhaustive search: `eps` is the k-th smallest
/// joint max-norm distance to another point, and the counts are other points
/// strictly closer than `eps` in each marginal.
pub fn brute_neighbor_stats(x: ArrayView2<f64>, y: ArrayView2<f64>, k: usize) -> Vec<(f64, usize, usize)> {
    let n = x.nrows();
    (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| max_dist(x, i, j).max(max_dist(y, i, j)))
                .collect();
            d.sort_by(f64::total_cmp);
            let eps = d[k - 1];
            let nx = (0..n).filter(|&j| j != i && max_dist(x, i, j) < eps).count();
            let ny = (0..n).filter(|&j| j != i && max_dist(y, i, j) < eps).count();
            (eps, nx, ny)
        })
        .collect()
}

pub fn brute_ksg(x: ArrayView2<f64>, y: ArrayView2<f64>, k: usize) -> f64 {
    use statrs::function::gamma::digamma;
    let stats = brute_neighbor_stats(x, y, k);
    let n = stats.len() as f64;
    let avg = stats
        .iter()
        .map(|&(_, nx, ny)| digamma(nx as f64 + 1.0) + digamma(ny as f64 + 1.0))
        .sum::<f64>()
        / n;
    digamma(k as f64) + digamma(n) - avg
}

/// A distribution over `(x, y, z)` in {0,1}^3 with rational probabilities
/// `count / total`, enumerable exactly.
pub struct Toy {
    /// `p[x][y][z]` as integer counts.
    pub p: [[[u32; 2]; 2]; 2],
    /// `q[y][z]` counts of a conditional for `y` given `z`, out of `q_total`
    /// for each `z`.
    pub q: [[u32; 2]; 2],
    pub q_total: u32,
}

impl Toy {
    pub fn total(&self) -> u32 {
        self.p.iter().flatten().flatten().sum()
    }

    pub fn prob(&self, x: usize, y: usize, z: usize) -> f64 {
        self.p[x][y][z] as f64 / self.total() as f64
    }

    pub fn p_xz(&self, x: usize, z: usize) -> f64 {
        self.prob(x, 0, z) + self.prob(x, 1, z)
    }

    pub fn p_z(&self, z: usize) -> f64 {
        (0..2).map(|x| self.p_xz(x, z)).sum()
    }

    pub fn p_yz(&self, y: usize, z: usize) -> f64 {
        self.prob(0, y, z) + self.prob(1, y, z)
    }

    pub fn q_y_given_z(&self, y: usize, z: usize) -> f64 {
        self.q[y][z] as f64 / self.q_total as f64
    }

    pub fn states() -> impl Iterator<Item = (usize, usize, usize)> {
        (0..2).flat_map(|x| (0..2).flat_map(move |y| (0..2).map(move |z| (x, y, z))))
    }

    /// `I(X;Y|Z)` by enumeration.
    pub fn cmi(&self) -> f64 {
        Self::states()
            .filter(|&(x, y, z)| self.p[x][y][z] > 0)
            .map(|(x, y, z)| {
                let p = self.prob(x, y, z);
                p * (p * self.p_z(z) / (self.p_xz(x, z) * self.p_yz(y, z))).ln()
            })
            .sum()
    }

    /// `E_Z KL(P(y|z) || Q(y|z))` by enumeration.
    pub fn conditional_kl(&self) -> f64 {
        let mut kl = 0.0;
        for z in 0..2 {
            for y in 0..2 {
                let pyz = self.p_yz(y, z);
                if pyz > 0.0 {
                    let p_cond = pyz / self.p_z(z);
                    kl += pyz * (p_cond / self.q_y_given_z(y, z)).ln();
                }
            }
        }
        kl
    }

    /// `log P(x,y,z) / (P(x,z) Q(y|z)) + c`.
    pub fn optimal_r(&self, x: usize, y: usize, z: usize, c: f64) -> f64 {
        (self.prob(x, y, z) / (self.p_xz(x, z) * self.q_y_given_z(y, z))).ln() + c
    }

    /// Samples from the joint with each state repeated by its count, so that
    /// a uniform mean over them is the exact expectation.
    pub fn joint_states(&self) -> Vec<(usize, usize, usize)> {
        Self::states()
            .flat_map(|(x, y, z)| std::iter::repeat_n((x, y, z), self.p[x][y][z] as usize))
            .collect()
    }

    /// Samples from `P(x,z) Q(y|z)`, replicated the same way: state
    /// `(x,y,z)` appears `(p[x][0][z] + p[x][1][z]) * q[y][z]` times.
    pub fn product_states(&self) -> Vec<(usize, usize, usize)> {
        Self::states()
            .flat_map(|(x, y, z)| {
                let count = (self.p[x][0][z] + self.p[x][1][z]) * self.q[y][z];
                std::iter::repeat_n((x, y, z), count as usize)
            })
            .collect()
    }
}
