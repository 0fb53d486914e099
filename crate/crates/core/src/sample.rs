//! The sample table every estimator consumes.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column partition `[x | y | z]` of a [`SampleSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub dx: usize,
    pub dy: usize,
    pub dz: usize,
}

impl Dims {
    pub const fn new(dx: usize, dy: usize, dz: usize) -> Self {
        Self { dx, dy, dz }
    }

    pub const fn total(&self) -> usize {
        self.dx + self.dy + self.dz
    }
}

/// `n` rows of real-valued samples with columns ordered `[x | y | z]`.
/// `dz == 0` for plain mutual-information problems.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: Array2<f64>,
    dims: Dims,
}

impl SampleSet {
    pub fn new(data: Array2<f64>, dims: Dims) -> Result<Self> {
        if dims.dx == 0 || dims.dy == 0 {
            return Err(Error::Dimension("dx and dy must both be >= 1".into()));
        }
        if data.ncols() != dims.total() {
            return Err(Error::Dimension(format!(
                "{} columns but dims {:?} sum to {}",
                data.ncols(),
                dims,
                dims.total()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("samples contain NaN/Inf".into()));
        }
        Ok(Self { data, dims })
    }

    pub fn from_blocks(
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        z: Option<ArrayView2<f64>>,
    ) -> Result<Self> {
        let n = x.nrows();
        if y.nrows() != n || z.is_some_and(|z| z.nrows() != n) {
            return Err(Error::Dimension("blocks have different row counts".into()));
        }
        let dz = z.map_or(0, |z| z.ncols());
        let mut parts = vec![x.view(), y.view()];
        if let Some(z) = &z {
            parts.push(z.view());
        }
        let data = concatenate(Axis(1), &parts)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Self::new(data, Dims::new(x.ncols(), y.ncols(), dz))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.data.slice(s![.., ..self.dims.dx])
    }

    pub fn y(&self) -> ArrayView2<'_, f64> {
        let d = self.dims;
        self.data.slice(s![.., d.dx..d.dx + d.dy])
    }

    pub fn z(&self) -> ArrayView2<'_, f64> {
        let d = self.dims;
        self.data.slice(s![.., d.dx + d.dy..])
    }

    /// Z-score every column. Constant columns are only centered.
    pub fn standardized(&self) -> SampleSet {
        let mut data = self.data.clone();
        standardize_columns(&mut data);
        SampleSet {
            data,
            dims: self.dims,
        }
    }

    /// Rows reordered so that row `i` of the result is row `perm[i]` here.
    pub fn permuted_rows(&self, perm: &[usize]) -> Result<SampleSet> {
        if perm.len() != self.n() {
            return Err(Error::Dimension("permutation length differs from n".into()));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidInput("not a permutation".into()));
            }
        }
        Ok(SampleSet {
            data: self.data.select(Axis(0), perm),
            dims: self.dims,
        })
    }
}

/// In-place z-scoring with the population standard deviation.
pub(crate) fn standardize_columns(data: &mut Array2<f64>) {
    let n = data.nrows();
    if n == 0 {
        return;
    }
    for mut col in data.columns_mut() {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if sd > 0.0 && sd.is_finite() {
            col.mapv_inplace(|v| (v - mean) / sd);
        } else {
            col.mapv_inplace(|v| v - mean);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn blocks_and_views() {
        let x = array![[1.0], [2.0]];
        let y = array![[3.0, 4.0], [5.0, 6.0]];
        let z = array![[7.0], [8.0]];
        let s = SampleSet::from_blocks(x.view(), y.view(), Some(z.view())).unwrap();
        assert_eq!(s.dims(), Dims::new(1, 2, 1));
        assert_eq!(s.y(), y);
        assert_eq!(s.z(), z);
        let no_z = SampleSet::from_blocks(x.view(), y.view(), None).unwrap();
        assert_eq!(no_z.z().ncols(), 0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SampleSet::new(Array2::zeros((3, 3)), Dims::new(1, 1, 0)).is_err());
        assert!(SampleSet::new(Array2::zeros((3, 2)), Dims::new(0, 2, 0)).is_err());
        let mut d = Array2::zeros((3, 2));
        d[[1, 1]] = f64::NAN;
        assert!(SampleSet::new(d, Dims::new(1, 1, 0)).is_err());
    }

    #[test]
    fn standardize_gives_unit_columns() {
        let data = array![[1.0, 10.0, 3.0], [2.0, 30.0, 3.0], [4.0, 20.0, 3.0], [9.0, 0.0, 3.0]];
        let s = SampleSet::new(data, Dims::new(1, 1, 1)).unwrap().standardized();
        for (j, col) in s.data().columns().into_iter().enumerate() {
            let m = col.mean().unwrap();
            assert!(m.abs() < 1e-12);
            if j < 2 {
                let v = col.iter().map(|v| v * v).sum::<f64>() / 4.0;
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn permutation_validation() {
        let s = SampleSet::new(array![[1.0, 2.0], [3.0, 4.0]], Dims::new(1, 1, 0)).unwrap();
        assert_eq!(s.permuted_rows(&[1, 0]).unwrap().data()[[0, 0]], 3.0);
        assert!(s.permuted_rows(&[0, 0]).is_err());
        assert!(s.permuted_rows(&[0]).is_err());
    }
}
