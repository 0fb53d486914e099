//! Pieces shared by the training loops.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Draws batches by shuffling row indices and keeping the first `batch` of them.
pub(crate) struct BatchSampler {
    perm: Vec<usize>,
}

impl BatchSampler {
    pub fn new(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
        }
    }

    pub fn draw(&mut self, batch: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let (chosen, _) = self.perm.partial_shuffle(rng, batch);
        chosen.to_vec()
    }
}

pub(crate) fn gaussian_noise(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// `[noise | cond]`, or just the noise when there is nothing to condition on.
pub(crate) fn generator_input(noise: Array2<f64>, cond: ArrayView2<f64>) -> Result<Array2<f64>> {
    if cond.ncols() == 0 {
        return Ok(noise);
    }
    concatenate(Axis(1), &[noise.view(), cond.view()]).map_err(|e| Error::Dimension(e.to_string()))
}

pub(crate) fn scores(out: &Array2<f64>) -> Vec<f64> {
    out.column(0).to_vec()
}

pub(crate) fn as_column(v: Vec<f64>) -> Array2<f64> {
    let n = v.len();
    Array2::from_shape_vec((n, 1), v).expect("length matches")
}

pub(crate) fn ensure_finite(what: &str, step: u64, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} became {v} at step {step}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn batches_have_distinct_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = BatchSampler::new(50);
        for _ in 0..10 {
            let mut b = s.draw(20, &mut rng);
            b.sort_unstable();
            b.dedup();
            assert_eq!(b.len(), 20);
            assert!(b.iter().all(|&i| i < 50));
        }
    }

    #[test]
    fn empty_condition_passes_noise_through() {
        let noise = Array2::ones((3, 2));
        let z = Array2::<f64>::zeros((3, 0));
        assert_eq!(generator_input(noise.clone(), z.view()).unwrap(), noise);
        let z = Array2::<f64>::zeros((3, 1));
        assert_eq!(generator_input(noise, z.view()).unwrap().ncols(), 3);
    }
}
