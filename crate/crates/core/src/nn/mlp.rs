use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => z.clone(),
            Activation::Relu => z.mapv(|v| v.max(0.0)),
        }
    }
}

/// `y = act(x W^T + b)` for a batch `x` of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `out x in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer inputs and pre-activations of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub inputs: Vec<Array2<f64>>,
    pub pre: Vec<Array2<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub weight: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl Mlp {
    /// He-uniform weights, zero biases. Hidden layers use ReLU, the last
    /// layer is linear.
    pub fn he_uniform<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need at least input and output widths");
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let (fan_in, fan_out) = (dims[l], dims[l + 1]);
                let limit = (6.0 / fan_in as f64).sqrt();
                let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                    rng.random_range(-limit..limit)
                });
                Dense {
                    weight,
                    bias: Array1::zeros(fan_out),
                    activation: if l + 1 < n { Activation::Relu } else { Activation::Identity },
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let n = dims.len() - 1;
        Self {
            layers: (0..n)
                .map(|l| Dense {
                    weight: Array2::zeros((dims[l + 1], dims[l])),
                    bias: Array1::zeros(dims[l + 1]),
                    activation: if l + 1 < n { Activation::Relu } else { Activation::Identity },
                })
                .collect(),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_width()];
        d.extend(self.layers.iter().map(|l| l.weight.nrows()));
        d
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("nonempty").weight.nrows()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache), NnError> {
        self.check_width(x.ncols())?;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut a = x.to_owned();
        for layer in &self.layers {
            let z = a.dot(&layer.weight.t()) + &layer.bias;
            let next = layer.activation.apply(&z);
            cache.inputs.push(a);
            cache.pre.push(z);
            a = next;
        }
        Ok((a, cache))
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_width(x.ncols())?;
        if x.nrows() == 1 {
            // Matrix-vector products run along contiguous weight rows.
            let mut v = x.row(0).to_owned();
            for layer in &self.layers {
                let mut z = layer.weight.dot(&v) + &layer.bias;
                if layer.activation == Activation::Relu {
                    z.mapv_inplace(|t| t.max(0.0));
                }
                v = z;
            }
            return Ok(v.insert_axis(Axis(0)));
        }
        let mut a = x.to_owned();
        for layer in &self.layers {
            a = layer.activation.apply(&(a.dot(&layer.weight.t()) + &layer.bias));
        }
        Ok(a)
    }

    fn check_width(&self, found: usize) -> Result<(), NnError> {
        let expected = self.input_width();
        if found != expected {
            return Err(NnError::Shape { expected, found });
        }
        Ok(())
    }

    /// Gradients of a scalar loss given `d loss / d output` per batch row.
    pub fn backward(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> MlpGrads {
        let n = self.layers.len();
        let mut weight = Vec::with_capacity(n);
        let mut bias = Vec::with_capacity(n);
        let mut delta = upstream.to_owned();
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            if layer.activation == Activation::Relu {
                delta.zip_mut_with(&cache.pre[l], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            weight.push(delta.t().dot(&cache.inputs[l]));
            bias.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                delta = delta.dot(&layer.weight);
            }
        }
        weight.reverse();
        bias.reverse();
        MlpGrads { weight, bias }
    }

    /// `params -= lr * grads`. Refuses non-finite gradients.
    pub fn sgd_step(&mut self, grads: &MlpGrads, lr: f64) -> Result<(), NnError> {
        if !grads.is_finite() {
            return Err(NnError::NonFinite);
        }
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(grads.weight.iter().zip(&grads.bias)) {
            layer.weight.scaled_add(-lr, gw);
            layer.bias.scaled_add(-lr, gb);
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Flat parameter `i`: each layer's weights (row-major) then its bias.
    pub fn param(&self, i: usize) -> f64 {
        let (l, j) = self.locate(i);
        let layer = &self.layers[l];
        if j < layer.weight.len() {
            layer.weight.as_slice().expect("standard layout")[j]
        } else {
            layer.bias[j - layer.weight.len()]
        }
    }

    pub fn set_param(&mut self, i: usize, v: f64) {
        let (l, j) = self.locate(i);
        let layer = &mut self.layers[l];
        let nw = layer.weight.len();
        if j < nw {
            layer.weight.as_slice_mut().expect("standard layout")[j] = v;
        } else {
            layer.bias[j - nw] = v;
        }
    }

    fn locate(&self, mut i: usize) -> (usize, usize) {
        for (l, layer) in self.layers.iter().enumerate() {
            let n = layer.weight.len() + layer.bias.len();
            if i < n {
                return (l, i);
            }
            i -= n;
        }
        panic!("parameter index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weight: mlp.layers.iter().map(|l| Array2::zeros(l.weight.raw_dim())).collect(),
            bias: mlp.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        }
    }

    /// Same flat order as [`Mlp::param`].
    pub fn get(&self, mut i: usize) -> f64 {
        for (w, b) in self.weight.iter().zip(&self.bias) {
            if i < w.len() {
                return w.as_slice().expect("standard layout")[i];
            }
            i -= w.len();
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("gradient index out of range");
    }

    pub fn scale(&mut self, c: f64) {
        for w in &mut self.weight {
            *w *= c;
        }
        for b in &mut self.bias {
            *b *= c;
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weight
            .iter()
            .all(|w| w.iter().all(|v| v.is_finite()))
            && self.bias.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.weight
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.bias.iter().flat_map(|b| b.iter()))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_shapes_and_determinism() {
        let a = Mlp::he_uniform(&[4, 8, 2], &mut ChaCha8Rng::seed_from_u64(0));
        let b = Mlp::he_uniform(&[4, 8, 2], &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(a, b);
        assert_eq!(a.layers[0].weight.dim(), (8, 4));
        assert_eq!(a.layers[1].weight.dim(), (2, 8));
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&v| v == 0.0)));
        assert_eq!(a.dims(), vec![4, 8, 2]);
    }

    #[test]
    fn he_variance() {
        let fan_in = 50;
        let m = Mlp::he_uniform(&[fan_in, 2000, 1], &mut ChaCha8Rng::seed_from_u64(1));
        let w = &m.layers[0].weight;
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let target = 2.0 / fan_in as f64;
        assert!((var / target - 1.0).abs() < 0.05, "var {var} vs {target}");
    }

    #[test]
    fn zero_net_outputs_zero() {
        let m = Mlp::zeros(&[3, 5, 2]);
        let (y, _) = m.forward(array![[1.0, -2.0, 3.0]].view()).unwrap();
        assert_eq!(y, array![[0.0, 0.0]]);
    }

    #[test]
    fn identity_layer_passes_through() {
        let mut m = Mlp::zeros(&[3, 3]);
        m.layers[0].weight = Array2::eye(3);
        let x = array![[0.5, -1.0, 2.0]];
        assert_eq!(m.predict(x.view()).unwrap(), x);
    }

    #[test]
    fn duplicated_rows_match() {
        let m = Mlp::he_uniform(&[3, 7, 7, 2], &mut ChaCha8Rng::seed_from_u64(2));
        let y = m.predict(array![[0.1, 0.2, 0.3], [0.1, 0.2, 0.3]].view()).unwrap();
        assert_eq!(y.row(0), y.row(1));
    }

    #[test]
    fn width_mismatch_is_error() {
        let m = Mlp::zeros(&[3, 2]);
        assert!(matches!(
            m.forward(array![[1.0, 2.0]].view()),
            Err(NnError::Shape { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let m = Mlp::he_uniform(&[3, 4, 2], &mut ChaCha8Rng::seed_from_u64(3));
        let (_, c) = m.forward(array![[1.0, 2.0, 3.0]].view()).unwrap();
        let g = m.backward(&c, Array2::zeros((1, 2)).view());
        assert_eq!(g.l2_norm(), 0.0);
    }

    #[test]
    fn linear_squared_loss_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = Mlp::he_uniform(&[3, 2], &mut rng);
        let x = array![[0.3, -0.7, 1.1]];
        let y = array![[0.5, -0.25]];
        let (out, c) = m.forward(x.view()).unwrap();
        let resid = &out - &y;
        let g = m.backward(&c, (2.0 * &resid).view());
        // d/dW ||Wx + b - y||^2 = 2 (Wx + b - y) x^T
        let expect = (2.0 * &resid).t().dot(&x);
        for (a, b) in g.weight[0].iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_indexing_round_trips() {
        let mut m = Mlp::he_uniform(&[2, 3, 1], &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(m.num_params(), 6 + 3 + 3 + 1);
        m.set_param(7, 9.0);
        assert_eq!(m.layers[0].bias[1], 9.0);
        m.set_param(12, -1.0);
        assert_eq!(m.layers[1].bias[0], -1.0);
        assert_eq!(m.param(12), -1.0);
    }

    #[test]
    fn zero_lr_keeps_params() {
        let mut m = Mlp::he_uniform(&[2, 3, 1], &mut ChaCha8Rng::seed_from_u64(6));
        let before = m.clone();
        let mut g = MlpGrads::zeros_like(&m);
        g.weight[0].fill(1.0);
        m.sgd_step(&g, 0.0).unwrap();
        assert_eq!(m, before);
        g.bias[0][0] = f64::NAN;
        assert!(matches!(m.sgd_step(&g, 0.1), Err(NnError::NonFinite)));
        assert_eq!(m, before);
    }

    #[test]
    fn sgd_descends_a_bowl() {
        let mut m = Mlp::he_uniform(&[2, 1], &mut ChaCha8Rng::seed_from_u64(7));
        let x = array![[1.0, 2.0], [-1.0, 0.5]];
        let loss = |m: &Mlp| m.predict(x.view()).unwrap().mapv(|v| v * v).sum();
        let before = loss(&m);
        let (out, c) = m.forward(x.view()).unwrap();
        let g = m.backward(&c, (2.0 * &out).view());
        m.sgd_step(&g, 1e-2).unwrap();
        assert!(loss(&m) < before);
    }
}
