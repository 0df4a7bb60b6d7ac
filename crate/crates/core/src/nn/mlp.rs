use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

/// Output activation. Hidden layers always use ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    Identity,
    /// `bound * tanh(z)`
    TanhScaled {
        bound: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer {
            weight: Array2::zeros((rows, cols)),
            bias: Array1::zeros(rows),
        }
    }

    fn zeros_like(&self) -> Self {
        Layer::zeros(self.weight.nrows(), self.weight.ncols())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
    pub head: Head,
}

/// Activations saved by [`MlpParams::forward_batch`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of the last layer.
    last_pre: Array2<f64>,
    pub output: Array2<f64>,
}

/// Uniform fan-in initialization: every weight and bias of a layer with
/// `fan_in` inputs is drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn mlp_init(layer_sizes: &[usize], head: Head, seed: u64) -> Result<MlpParams, NnError> {
    if layer_sizes.len() < 2 {
        return Err(NnError::TooFewLayers(layer_sizes.to_vec()));
    }
    if layer_sizes.contains(&0) {
        return Err(NnError::ZeroWidth(layer_sizes.to_vec()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weight =
                Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..bound));
            let bias = Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..bound));
            Layer { weight, bias }
        })
        .collect();
    Ok(MlpParams { layers, head })
}

impl MlpParams {
    /// Builds parameters from explicit layers, checking that shapes compose.
    pub fn from_layers(layers: Vec<Layer>, head: Head) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::TooFewLayers(vec![]));
        }
        for (i, l) in layers.iter().enumerate() {
            let expected = if i == 0 {
                l.weight.ncols()
            } else {
                layers[i - 1].weight.nrows()
            };
            if l.weight.ncols() != expected || l.bias.len() != l.weight.nrows() {
                return Err(NnError::ShapeMismatch {
                    layer: i,
                    rows: l.weight.nrows(),
                    cols: l.weight.ncols(),
                    expected,
                });
            }
        }
        Ok(MlpParams { layers, head })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weight.nrows()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.weight.nrows()));
        sizes
    }

    pub fn zeros_like(&self) -> MlpParams {
        MlpParams {
            layers: self.layers.iter().map(Layer::zeros_like).collect(),
            head: self.head,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Single-input forward pass.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut h = Array1::from(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = l.weight.dot(&h) + &l.bias;
            if i < last {
                z.mapv_inplace(relu);
            } else {
                self.apply_head(&mut z.view_mut());
            }
            h = z;
        }
        h.to_vec()
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> ForwardCache {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        let mut last_pre = Array2::zeros((0, 0));
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = h.dot(&l.weight.t());
            z += &l.bias;
            inputs.push(h);
            if i < last {
                z.mapv_inplace(relu);
                h = z;
            } else {
                last_pre = z.clone();
                self.apply_head(&mut z.view_mut());
                h = z;
            }
        }
        ForwardCache {
            inputs,
            last_pre,
            output: h,
        }
    }

    fn apply_head<D: ndarray::Dimension>(&self, z: &mut ndarray::ArrayViewMut<f64, D>) {
        if let Head::TanhScaled { bound } = self.head {
            z.mapv_inplace(|v| bound * v.tanh());
        }
    }

    /// Reverse-mode gradients for a batch.
    ///
    /// `upstream` is `dL/d(output)` with the same shape as `cache.output`.
    /// Returns the parameter gradients (summed over the batch) and `dL/d(input)`.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> (MlpParams, Array2<f64>) {
        let mut delta = upstream.to_owned();
        if let Head::TanhScaled { bound } = self.head {
            Zip::from(&mut delta)
                .and(&cache.last_pre)
                .for_each(|d, &z| {
                    let t = z.tanh();
                    *d *= bound * (1.0 - t * t);
                });
        }
        let mut grads = self.zeros_like();
        for i in (0..self.layers.len()).rev() {
            let input = &cache.inputs[i];
            grads.layers[i].weight = delta.t().dot(input);
            grads.layers[i].bias = delta.sum_axis(Axis(0));
            let mut prev = delta.dot(&self.layers[i].weight);
            if i > 0 {
                // inputs[i] is relu(pre) of layer i-1, so relu'(pre) = [inputs[i] > 0]
                Zip::from(&mut prev).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = prev;
        }
        (grads, delta)
    }

    /// Single-input gradients of `upstream . f(x)` with respect to the parameters.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> MlpParams {
        let xb = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        let ub = ArrayView2::from_shape((1, upstream.len()), upstream).expect("row vector");
        let cache = self.forward_batch(xb);
        self.backward_batch(&cache, ub).0
    }

    /// `self <- rho * source + (1 - rho) * self`
    pub fn soft_update_from(&mut self, source: &MlpParams, rho: f64) {
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            Zip::from(&mut t.weight)
                .and(&s.weight)
                .for_each(|t, &s| *t = rho * s + (1.0 - rho) * *t);
            Zip::from(&mut t.bias)
                .and(&s.bias)
                .for_each(|t, &s| *t = rho * s + (1.0 - rho) * *t);
        }
    }

    /// Order-sensitive FNV-1a digest of all parameter bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |v: f64| {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for l in &self.layers {
            l.weight.iter().for_each(|&v| feed(v));
            l.bias.iter().for_each(|&v| feed(v));
        }
        h
    }

    pub fn layer(&self, i: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        (self.layers[i].weight.view(), self.layers[i].bias.view())
    }
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}
