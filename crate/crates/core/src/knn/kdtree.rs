//! Exact kd-tree under the max-norm (Chebyshev) distance.
//!
//! Distances are computed by one function for every query path, so results
//! agree bitwise with an all-pairs scan over the same points.

use ndarray::ArrayView2;

const LEAF_SIZE: usize = 16;

#[inline]
pub fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug)]
struct Node {
    start: usize,
    end: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    children: Option<(usize, usize)>,
}

#[derive(Debug)]
pub struct KdTree {
    dim: usize,
    /// Points in tree order, row-major.
    points: Vec<f64>,
    /// Original row index of each point in tree order.
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(data: ArrayView2<f64>) -> Self {
        let (n, dim) = data.dim();
        let mut ids: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::new();
        if n > 0 {
            build_node(&data, &mut ids, 0, n, &mut nodes);
        }
        let mut points = Vec::with_capacity(n * dim);
        for &i in &ids {
            points.extend(data.row(i).iter());
        }
        Self {
            dim,
            points,
            ids,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn point(&self, slot: usize) -> &[f64] {
        &self.points[slot * self.dim..(slot + 1) * self.dim]
    }

    /// Distance from `q` to its `k`-th nearest point, ignoring the point
    /// whose original index is `exclude`.
    pub fn kth_distance(&self, q: &[f64], k: usize, exclude: Option<usize>) -> f64 {
        assert!(k >= 1);
        // ascending list of the best k distances so far
        let mut best: Vec<f64> = Vec::with_capacity(k + 1);
        if !self.nodes.is_empty() {
            self.knn_visit(0, q, k, exclude, &mut best);
        }
        best.get(k - 1).copied().unwrap_or(f64::INFINITY)
    }

    fn knn_visit(&self, node: usize, q: &[f64], k: usize, exclude: Option<usize>, best: &mut Vec<f64>) {
        let nd = &self.nodes[node];
        if best.len() == k && min_dist(q, &nd.lo, &nd.hi) >= best[k - 1] {
            return;
        }
        match nd.children {
            None => {
                for slot in nd.start..nd.end {
                    if Some(self.ids[slot]) == exclude {
                        continue;
                    }
                    let d = chebyshev(q, self.point(slot));
                    if best.len() < k || d < best[k - 1] {
                        let pos = best.partition_point(|&b| b <= d);
                        best.insert(pos, d);
                        best.truncate(k);
                    }
                }
            }
            Some((l, r)) => {
                let dl = min_dist(q, &self.nodes[l].lo, &self.nodes[l].hi);
                let dr = min_dist(q, &self.nodes[r].lo, &self.nodes[r].hi);
                let (first, second) = if dl <= dr { (l, r) } else { (r, l) };
                self.knn_visit(first, q, k, exclude, best);
                self.knn_visit(second, q, k, exclude, best);
            }
        }
    }

    /// Number of points with distance strictly below `radius` (the query
    /// point itself included when it is in the tree).
    pub fn count_within(&self, q: &[f64], radius: f64) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        self.count_visit(0, q, radius)
    }

    fn count_visit(&self, node: usize, q: &[f64], radius: f64) -> usize {
        let nd = &self.nodes[node];
        if min_dist(q, &nd.lo, &nd.hi) >= radius {
            return 0;
        }
        if max_dist(q, &nd.lo, &nd.hi) < radius {
            return nd.end - nd.start;
        }
        match nd.children {
            None => (nd.start..nd.end)
                .filter(|&slot| chebyshev(q, self.point(slot)) < radius)
                .count(),
            Some((l, r)) => self.count_visit(l, q, radius) + self.count_visit(r, q, radius),
        }
    }
}

fn build_node(
    data: &ArrayView2<f64>,
    ids: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let dim = data.ncols();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &i in &ids[start..end] {
        for (d, &v) in data.row(i).iter().enumerate() {
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    let idx = nodes.len();
    nodes.push(Node {
        start,
        end,
        lo,
        hi,
        children: None,
    });
    if end - start <= LEAF_SIZE {
        return idx;
    }
    let split_dim = (0..dim)
        .max_by(|&a, &b| {
            let sa = nodes[idx].hi[a] - nodes[idx].lo[a];
            let sb = nodes[idx].hi[b] - nodes[idx].lo[b];
            sa.total_cmp(&sb)
        })
        .unwrap_or(0);
    if nodes[idx].hi[split_dim] == nodes[idx].lo[split_dim] {
        // all points identical
        return idx;
    }
    let mid = start + (end - start) / 2;
    ids[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        data[[a, split_dim]].total_cmp(&data[[b, split_dim]])
    });
    let left = build_node(data, ids, start, mid, nodes);
    let right = build_node(data, ids, mid, end, nodes);
    nodes[idx].children = Some((left, right));
    idx
}

#[inline]
fn min_dist(q: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for ((&v, &l), &h) in q.iter().zip(lo).zip(hi) {
        if v < l {
            m = m.max((v - l).abs());
        } else if v > h {
            m = m.max((v - h).abs());
        }
    }
    m
}

#[inline]
fn max_dist(q: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    q.iter()
        .zip(lo)
        .zip(hi)
        .map(|((&v, &l), &h)| (v - l).abs().max((v - h).abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, d: usize, seed: u64, grid: bool) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| {
            let v: f64 = rng.gen_range(-1.0..1.0);
            if grid {
                (v * 4.0).round() / 4.0
            } else {
                v
            }
        })
    }

    fn brute_kth(data: &Array2<f64>, i: usize, k: usize) -> f64 {
        let q = data.row(i).to_vec();
        let mut d: Vec<f64> = (0..data.nrows())
            .filter(|&j| j != i)
            .map(|j| chebyshev(&q, data.row(j).as_slice().unwrap()))
            .collect();
        d.sort_by(f64::total_cmp);
        d[k - 1]
    }

    #[test]
    fn matches_brute_force_with_and_without_ties() {
        for (seed, grid) in [(1, false), (2, true)] {
            let data = cloud(300, 3, seed, grid);
            let tree = KdTree::build(data.view());
            for i in 0..data.nrows() {
                let q = data.row(i).to_vec();
                for k in [1, 3, 7] {
                    let kth = tree.kth_distance(&q, k, Some(i));
                    assert_eq!(kth, brute_kth(&data, i, k));
                    let brute = (0..data.nrows())
                        .filter(|&j| chebyshev(&q, data.row(j).as_slice().unwrap()) < kth)
                        .count();
                    assert_eq!(tree.count_within(&q, kth), brute);
                }
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        let same = Array2::from_elem((40, 2), 0.5);
        let tree = KdTree::build(same.view());
        assert_eq!(tree.kth_distance(&[0.5, 0.5], 3, Some(0)), 0.0);
        assert_eq!(tree.count_within(&[0.5, 0.5], 0.0), 0);
        assert_eq!(tree.count_within(&[0.5, 0.5], 1e-9), 40);
        let empty = KdTree::build(Array2::<f64>::zeros((0, 2)).view());
        assert!(empty.is_empty());
        assert_eq!(empty.kth_distance(&[0.0, 0.0], 1, None), f64::INFINITY);
    }
}
