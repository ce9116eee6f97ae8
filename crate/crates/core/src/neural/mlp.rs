//! Fully connected networks on column-major batches (`features × samples`).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Affine map `W·a + b`; `weight` is `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(out: usize, input: usize) -> Self {
        Self {
            weight: Matrix::zeros(out, input),
            bias: vec![0.0; out],
        }
    }

    pub fn n_params(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Linear,
    Softmax,
}

/// Rectifier between layers, `output` after the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    dims: Vec<usize>,
    layers: Vec<Layer>,
    output: Output,
}

/// Per-layer inputs and pre-activations kept for [`MlpNetwork::backward`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardCache {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    pub output: Matrix,
}

impl MlpNetwork {
    /// Weights drawn from `U(−√(6/fan_in), √(6/fan_in))`, zero biases.
    pub fn new<R: Rng>(dims: &[usize], output: Output, rng: &mut R) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer dims {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                Layer {
                    weight: Matrix::from_fn(w[1], w[0], |_, _| rng.random_range(-bound..bound)),
                    bias: vec![0.0; w[1]],
                }
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            layers,
            output,
        })
    }

    /// Network from explicit layers; consecutive shapes must chain.
    pub fn from_layers(input_dim: usize, layers: Vec<Layer>, output: Output) -> Result<Self> {
        let mut dims = vec![input_dim];
        for (i, l) in layers.iter().enumerate() {
            if l.weight.cols() != *dims.last().expect("non-empty") || l.bias.len() != l.weight.rows() {
                return Err(Error::shape(format!(
                    "layer {i} is {}x{} with {} biases after width {}",
                    l.weight.rows(),
                    l.weight.cols(),
                    l.bias.len(),
                    dims.last().expect("non-empty")
                )));
            }
            dims.push(l.weight.rows());
        }
        Ok(Self { dims, layers, output })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("non-empty")
    }

    pub fn output(&self) -> Output {
        self.output
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    /// Overwrites the parameters from `flat`, in [`MlpNetwork::params`] order.
    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::shape(format!("{} values for {} parameters", flat.len(), self.n_params())));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let w = l.weight.data_mut();
            w.copy_from_slice(&flat[at..at + w.len()]);
            at += w.len();
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardCache> {
        if x.rows() != self.input_dim() {
            return Err(Error::shape(format!("input has {} features, network expects {}", x.rows(), self.input_dim())));
        }
        let mut cache = ForwardCache::default();
        let mut a = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let z = l.weight.matmul(&a).add_row_offsets(&l.bias);
            cache.inputs.push(a);
            a = if i + 1 < self.layers.len() {
                z.map(|v| v.max(0.0))
            } else {
                match self.output {
                    Output::Linear => z.clone(),
                    Output::Softmax => softmax_columns(&z),
                }
            };
            cache.pre.push(z);
        }
        cache.output = a;
        Ok(cache)
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x)?.output)
    }

    /// Parameter gradients (shaped like the layers) and the input gradient,
    /// given `upstream = ∂L/∂output` for the batch in `cache`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<(Vec<Layer>, Matrix)> {
        if cache.inputs.len() != self.layers.len() || cache.pre.len() != self.layers.len() {
            return Err(Error::InvalidState("backward needs the cache of a forward pass through this network".into()));
        }
        if upstream.shape() != cache.output.shape() {
            return Err(Error::shape(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.shape(),
                cache.output.shape()
            )));
        }
        if self.layers.is_empty() {
            return Ok((Vec::new(), upstream.clone()));
        }
        let mut dz = match self.output {
            Output::Linear => upstream.clone(),
            Output::Softmax => softmax_backward(&cache.output, upstream),
        };
        let mut grads = vec![Layer::zeros(0, 0); self.layers.len()];
        for i in (0..self.layers.len()).rev() {
            grads[i] = Layer {
                weight: dz.matmul_t(&cache.inputs[i]),
                bias: dz.row_sums(),
            };
            let da = self.layers[i].weight.t_matmul(&dz);
            if i == 0 {
                return Ok((grads, da));
            }
            dz = da.zip_with(&cache.pre[i - 1], |g, z| if z > 0.0 { g } else { 0.0 });
        }
        unreachable!("loop returns at the first layer")
    }
}

pub fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::with_capacity(layers.iter().map(Layer::n_params).sum());
    for l in layers {
        out.extend_from_slice(l.weight.data());
        out.extend_from_slice(&l.bias);
    }
    out
}

/// Column-wise softmax with max subtraction.
pub fn softmax_columns(z: &Matrix) -> Matrix {
    let mut p = z.clone();
    for c in 0..z.cols() {
        let m = (0..z.rows()).map(|r| z[(r, c)]).fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for r in 0..z.rows() {
            let e = (z[(r, c)] - m).exp();
            p[(r, c)] = e;
            s += e;
        }
        for r in 0..z.rows() {
            p[(r, c)] /= s;
        }
    }
    p
}

/// `∂L/∂z` from `∂L/∂p` for `p = softmax(z)` per column.
fn softmax_backward(p: &Matrix, g: &Matrix) -> Matrix {
    let mut dz = Matrix::zeros(p.rows(), p.cols());
    for c in 0..p.cols() {
        let inner: f64 = (0..p.rows()).map(|r| p[(r, c)] * g[(r, c)]).sum();
        for r in 0..p.rows() {
            dz[(r, c)] = p[(r, c)] * (g[(r, c)] - inner);
        }
    }
    dz
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_depth_is_identity() {
        let net = MlpNetwork::new(&[3], Output::Linear, &mut rng(0)).unwrap();
        let x = Matrix::from_fn(3, 4, |r, c| (r + 2 * c) as f64);
        assert_eq!(net.apply(&x).unwrap(), x);
        let cache = net.forward(&x).unwrap();
        let (g, dx) = net.backward(&cache, &x).unwrap();
        assert!(g.is_empty());
        assert_eq!(dx, x);
    }

    #[test]
    fn single_layer_is_affine() {
        let w = Matrix::from_rows(&[&[1.0, 2.0], &[-1.0, 0.5], &[0.0, 3.0]]);
        let b = vec![0.1, -0.2, 0.3];
        let net = MlpNetwork::from_layers(2, vec![Layer { weight: w.clone(), bias: b.clone() }], Output::Linear).unwrap();
        let x = Matrix::from_rows(&[&[1.0, -2.0], &[0.5, 4.0]]);
        assert_eq!(net.apply(&x).unwrap(), w.matmul(&x).add_row_offsets(&b));
        // dL/dW = upstream · inputᵀ.
        let up = Matrix::from_fn(3, 2, |r, c| (r as f64) - (c as f64) * 0.5);
        let (g, _) = net.backward(&net.forward(&x).unwrap(), &up).unwrap();
        assert_eq!(g[0].weight, up.matmul_t(&x));
        assert_eq!(g[0].bias, up.row_sums());
    }

    #[test]
    fn two_layers_match_hand_rolled_forward() {
        let net = MlpNetwork::new(&[3, 4, 2], Output::Softmax, &mut rng(1)).unwrap();
        let x = [0.3, -1.2, 0.7];
        let l = net.layers();
        let hidden: Vec<f64> = (0..4)
            .map(|i| ((0..3).map(|j| l[0].weight[(i, j)] * x[j]).sum::<f64>() + l[0].bias[i]).max(0.0))
            .collect();
        let z: Vec<f64> = (0..2).map(|i| (0..4).map(|j| l[1].weight[(i, j)] * hidden[j]).sum::<f64>() + l[1].bias[i]).collect();
        let s: f64 = z.iter().map(|v| v.exp()).sum();
        let out = net.apply(&Matrix::new(3, 1, x.to_vec()).unwrap()).unwrap();
        for i in 0..2 {
            assert!((out[(i, 0)] - z[i].exp() / s).abs() < 1e-14);
        }
    }

    #[test]
    fn relu_blocks_negative_pre_activations() {
        let l0 = Layer {
            weight: Matrix::from_rows(&[&[1.0], &[-1.0]]),
            bias: vec![0.0, 0.0],
        };
        let l1 = Layer {
            weight: Matrix::from_rows(&[&[1.0, 1.0]]),
            bias: vec![0.0],
        };
        let net = MlpNetwork::from_layers(1, vec![l0, l1], Output::Linear).unwrap();
        let x = Matrix::from_rows(&[&[2.0]]);
        let (g, dx) = net.backward(&net.forward(&x).unwrap(), &Matrix::from_rows(&[&[1.0]])).unwrap();
        // Second hidden unit has pre-activation −2, so its incoming weight gets nothing.
        assert_eq!(g[0].weight[(1, 0)], 0.0);
        assert_eq!(g[0].weight[(0, 0)], 2.0);
        assert_eq!(dx[(0, 0)], 1.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut net = MlpNetwork::new(&[3, 5, 4, 3], Output::Softmax, &mut rng(2)).unwrap();
        let mut r = rng(3);
        let x = Matrix::from_fn(3, 6, |_, _| r.random_range(-1.0..1.0));
        let up = Matrix::from_fn(3, 6, |_, _| r.random_range(-1.0..1.0));
        let loss = |net: &MlpNetwork| net.apply(&x).unwrap().frobenius_dot(&up);
        let (g, dx) = net.backward(&net.forward(&x).unwrap(), &up).unwrap();
        let analytic = flatten(&g);
        let base = net.params();
        let h = 1e-5;
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            net.set_params(&p).unwrap();
            let f1 = loss(&net);
            p[i] -= 2.0 * h;
            net.set_params(&p).unwrap();
            let f0 = loss(&net);
            let fd = (f1 - f0) / (2.0 * h);
            assert!((fd - analytic[i]).abs() <= 1e-6 * fd.abs().max(1.0), "param {i}: {fd} vs {}", analytic[i]);
        }
        net.set_params(&base).unwrap();
        for c in 0..x.data().len() {
            let mut xp = x.clone();
            xp.data_mut()[c] += h;
            let f1 = net.apply(&xp).unwrap().frobenius_dot(&up);
            xp.data_mut()[c] -= 2.0 * h;
            let f0 = net.apply(&xp).unwrap().frobenius_dot(&up);
            assert!(((f1 - f0) / (2.0 * h) - dx.data()[c]).abs() < 1e-6);
        }
    }

    #[test]
    fn errors() {
        let net = MlpNetwork::new(&[3, 2], Output::Linear, &mut rng(0)).unwrap();
        assert!(matches!(net.forward(&Matrix::zeros(2, 1)), Err(Error::InvalidShape(_))));
        assert!(matches!(
            net.backward(&ForwardCache::default(), &Matrix::zeros(2, 1)),
            Err(Error::InvalidState(_))
        ));
        assert!(MlpNetwork::from_layers(4, vec![Layer::zeros(2, 3)], Output::Linear).is_err());
    }
}
