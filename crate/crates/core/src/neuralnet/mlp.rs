//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Layer `l` computes `a_{l+1} = act(a_l · W_l + b_l)` where `W_l` has shape
//! `(fan_in, fan_out)` and batches are row-major `(n, dim)` matrices. Hidden
//! layers share one activation; the output layer has its own.

use ndarray::{Array1, Array2, ArrayView2, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Network topology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpSpec {
    /// ReLU hidden layers with an identity output, the only shape the estimators use.
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Result<Self> {
        let spec = Self {
            input_dim,
            hidden_dims,
            output_dim,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() {
            return Err(Error::InvalidConfig(
                "an MLP needs at least one hidden layer".into(),
            ));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "all layer widths must be >= 1 (input {}, hidden {:?}, output {})",
                self.input_dim, self.hidden_dims, self.output_dim
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for every layer in order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|&(i, o)| i * o + o)
            .sum()
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.hidden_dims.len() + 1 {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Shape `(fan_in, fan_out)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Weights and biases of every layer. Gradients and optimizer accumulators
/// reuse the same container so shapes line up by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
}

/// Gradients with respect to every weight and bias.
pub type Gradients = MlpParams;

impl MlpParams {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| DenseLayer {
                weights: Array2::zeros((i, o)),
                bias: Array1::zeros(o),
            })
            .collect();
        Self { layers }
    }

    pub fn same_shape(&self, other: &MlpParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.dim() == b.weights.dim() && a.bias.dim() == b.bias.dim())
    }

    pub fn matches_spec(&self, spec: &MlpSpec) -> bool {
        let shapes = spec.layer_shapes();
        self.layers.len() == shapes.len()
            && self
                .layers
                .iter()
                .zip(shapes)
                .all(|(l, (i, o))| l.weights.dim() == (i, o) && l.bias.len() == o)
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    /// All entries, layer by layer, weights (row-major) before biases.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elementwise `self += other`. Shapes must agree.
    pub fn add_assign(&mut self, other: &MlpParams) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Dimension("gradient shapes differ".into()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
        Ok(())
    }
}

/// Activations recorded during a forward pass, needed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[l]` is the input of layer `l`; `inputs[0]` is the batch.
    inputs: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: MlpParams,
}

impl Mlp {
    /// He-uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    /// Deterministic in `seed`.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with_rng(spec, &mut rng)
    }

    pub fn init_with_rng<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut params = MlpParams::zeros(&spec);
        for layer in &mut params.layers {
            let fan_in = layer.weights.nrows() as f64;
            let bound = (6.0 / fan_in).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for w in layer.weights.iter_mut() {
                *w = dist.sample(rng);
            }
        }
        Ok(Self { spec, params })
    }

    pub fn from_params(spec: MlpSpec, params: MlpParams) -> Result<Self> {
        spec.validate()?;
        if !params.matches_spec(&spec) {
            return Err(Error::Dimension(
                "parameter shapes do not match the network spec".into(),
            ));
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("network parameters contain NaN/Inf".into()));
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    /// Mutable access for optimizers and tests. Callers must keep shapes intact.
    pub fn params_mut(&mut self) -> &mut MlpParams {
        &mut self.params
    }

    fn check_input(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.spec.input_dim {
            return Err(Error::Dimension(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.spec.input_dim
            )));
        }
        Ok(())
    }

    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&batch)?;
        let mut act = batch.to_owned();
        for (l, layer) in self.params.layers.iter().enumerate() {
            act = affine(&act.view(), layer, self.spec.activation_of(l));
        }
        Ok(act)
    }

    pub fn forward_cached(&self, batch: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(&batch)?;
        let mut inputs = Vec::with_capacity(self.params.layers.len());
        inputs.push(batch.to_owned());
        for (l, layer) in self.params.layers.iter().enumerate() {
            let next = affine(&inputs[l].view(), layer, self.spec.activation_of(l));
            inputs.push(next);
        }
        let output = inputs.pop().expect("at least one layer");
        Ok(ForwardCache { inputs, output })
    }

    /// Gradients of `sum_i <upstream_i, output_i>` with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> Result<Gradients> {
        let (grads, _) = self.backprop(cache, upstream, true, false)?;
        Ok(grads.expect("requested"))
    }

    /// Parameter gradients plus the gradient with respect to the input batch.
    pub fn backward_full(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let (grads, input) = self.backprop(cache, upstream, true, true)?;
        Ok((grads.expect("requested"), input.expect("requested")))
    }

    /// Gradient with respect to the input batch only.
    pub fn input_gradient(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> Result<Array2<f64>> {
        let (_, input) = self.backprop(cache, upstream, false, true)?;
        Ok(input.expect("requested"))
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
        want_params: bool,
        want_input: bool,
    ) -> Result<(Option<Gradients>, Option<Array2<f64>>)> {
        if upstream.dim() != cache.output.dim() {
            return Err(Error::Dimension(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.dim(),
                cache.output.dim()
            )));
        }
        let n_layers = self.params.layers.len();
        let mut grads = want_params.then(|| MlpParams::zeros(&self.spec));

        let mut delta = upstream.to_owned();
        let out_act = self.spec.output_activation;
        if out_act != Activation::Identity {
            Zip::from(&mut delta)
                .and(&cache.output)
                .for_each(|d, &o| *d *= out_act.derivative_from_output(o));
        }

        for l in (0..n_layers).rev() {
            let layer = &self.params.layers[l];
            let input = &cache.inputs[l];
            if let Some(g) = grads.as_mut() {
                g.layers[l].weights = input.t().dot(&delta);
                g.layers[l].bias = delta.sum_axis(ndarray::Axis(0));
            }
            if l == 0 {
                if want_input {
                    return Ok((grads, Some(delta.dot(&layer.weights.t()))));
                }
                break;
            }
            let mut prev = delta.dot(&layer.weights.t());
            let act = self.spec.activation_of(l - 1);
            Zip::from(&mut prev)
                .and(input)
                .for_each(|d, &a| *d *= act.derivative_from_output(a));
            delta = prev;
        }
        Ok((grads, None))
    }
}

fn affine(input: &ArrayView2<f64>, layer: &DenseLayer, act: Activation) -> Array2<f64> {
    let mut z = input.dot(&layer.weights);
    z += &layer.bias;
    if act != Activation::Identity {
        z.mapv_inplace(|v| act.apply(v));
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn random_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new(-1.0, 1.0);
        Array2::from_shape_fn((rows, cols), |_| dist.sample(&mut rng))
    }

    #[test]
    fn spec_validation() {
        assert!(MlpSpec::new(2, vec![], 1).is_err());
        assert!(MlpSpec::new(0, vec![3], 1).is_err());
        assert!(MlpSpec::new(2, vec![3, 0], 1).is_err());
        let spec = MlpSpec::new(15, vec![128, 32], 1).unwrap();
        assert_eq!(spec.layer_shapes(), vec![(15, 128), (128, 32), (32, 1)]);
        // both CIT topologies are encodable too
        assert!(MlpSpec::new(3, vec![128, 32, 8], 1).is_ok());
        assert!(MlpSpec::new(2, vec![128, 64, 16], 1).is_ok());
    }

    #[test]
    fn init_shapes_and_determinism() {
        let spec = MlpSpec::new(7, vec![128, 32], 3).unwrap();
        let a = Mlp::init(spec.clone(), 0).unwrap();
        let b = Mlp::init(spec, 0).unwrap();
        let dims: Vec<_> = a.params().layers.iter().map(|l| l.weights.dim()).collect();
        assert_eq!(dims, vec![(7, 128), (128, 32), (32, 3)]);
        assert!(a.params().is_finite());
        let bits_a: Vec<u64> = a.params().values().map(f64::to_bits).collect();
        let bits_b: Vec<u64> = b.params().values().map(f64::to_bits).collect();
        assert_eq!(bits_a, bits_b);
    }

    #[test]
    fn init_respects_he_bound() {
        let spec = MlpSpec::new(2, vec![4], 1).unwrap();
        let net = Mlp::init(spec, 7).unwrap();
        for layer in &net.params().layers {
            let bound = (6.0 / layer.weights.nrows() as f64).sqrt();
            assert!(layer.weights.iter().all(|w| w.abs() <= bound));
            assert!(layer.bias.iter().all(|&b| b == 0.0));
        }
        // fan_in 2 -> sqrt(3), fan_in 4 -> sqrt(1.5)
        assert!(net.params().layers[0].weights.iter().all(|w| w.abs() <= 3f64.sqrt()));
        assert!(net.params().layers[1].weights.iter().all(|w| w.abs() <= 1.5f64.sqrt()));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = MlpSpec::new(3, vec![5, 4], 2).unwrap();
        let net = Mlp::from_params(spec.clone(), MlpParams::zeros(&spec)).unwrap();
        let out = net.forward(random_batch(6, 3, 1).view()).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_network_passes_input_through() {
        // Identity hidden + identity output, both weight matrices I.
        let spec = MlpSpec {
            input_dim: 3,
            hidden_dims: vec![3],
            output_dim: 3,
            hidden_activation: Activation::Identity,
            output_activation: Activation::Identity,
        };
        let mut params = MlpParams::zeros(&spec);
        for l in &mut params.layers {
            l.weights = Array2::eye(3);
        }
        let net = Mlp::from_params(spec, params).unwrap();
        let x = random_batch(4, 3, 2);
        assert_eq!(net.forward(x.view()).unwrap(), x);
    }

    #[test]
    fn rows_are_independent() {
        let spec = MlpSpec::new(4, vec![6], 2).unwrap();
        let net = Mlp::init(spec, 3).unwrap();
        let x = random_batch(3, 4, 9);
        let batched = net.forward(x.view()).unwrap();
        for i in 0..3 {
            let single = net.forward(x.slice(ndarray::s![i..i + 1, ..])).unwrap();
            for j in 0..2 {
                assert!((single[[0, j]] - batched[[i, j]]).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = Mlp::init(MlpSpec::new(4, vec![6], 2).unwrap(), 0).unwrap();
        assert!(matches!(
            net.forward(random_batch(2, 3, 0).view()),
            Err(Error::Dimension(_))
        ));
        let cache = net.forward_cached(random_batch(2, 4, 0).view()).unwrap();
        assert!(net.backward(&cache, Array2::zeros((2, 3)).view()).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Mlp::init(MlpSpec::new(4, vec![6, 3], 2).unwrap(), 5).unwrap();
        let x = random_batch(5, 4, 1);
        let cache = net.forward_cached(x.view()).unwrap();
        let (g, gin) = net.backward_full(&cache, Array2::zeros((5, 2)).view()).unwrap();
        assert!(g.values().all(|v| v == 0.0));
        assert!(gin.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_gradient_by_hand() {
        // One identity hidden layer with W2 = I, so output = x W1 + b1.
        // With loss = sum of outputs, dL/dW1[i, j] = sum_rows x[:, i].
        let spec = MlpSpec {
            input_dim: 2,
            hidden_dims: vec![2],
            output_dim: 2,
            hidden_activation: Activation::Identity,
            output_activation: Activation::Identity,
        };
        let mut params = MlpParams::zeros(&spec);
        params.layers[0].weights = array![[0.3, -0.2], [0.5, 0.1]];
        params.layers[1].weights = Array2::eye(2);
        let net = Mlp::from_params(spec, params).unwrap();
        let x = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]];
        let cache = net.forward_cached(x.view()).unwrap();
        let g = net.backward(&cache, Array2::ones((3, 2)).view()).unwrap();
        let col_sums = x.sum_axis(ndarray::Axis(0));
        for i in 0..2 {
            for j in 0..2 {
                assert!((g.layers[0].weights[[i, j]] - col_sums[i]).abs() < 1e-12);
            }
        }
        assert_eq!(g.layers[0].bias, array![3.0, 3.0]);
    }
}
