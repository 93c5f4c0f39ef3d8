//! Fully connected layers with ReLU hidden activations and linear output.

use super::NetError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One dense layer. Weights are stored row-major: row r holds the incoming
/// weights of output unit r.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub out_dim: usize,
    pub in_dim: usize,
}

impl Layer {
    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            let mut acc = self.bias[r];
            for (w, xi) in row.iter().zip(x.iter()) {
                acc += w * xi;
            }
            *o = acc;
        }
    }
}

/// A feed-forward net: ReLU between layers, identity on the last layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    /// Pre-activation of every layer, in order.
    pre: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub d_weights: Vec<f64>,
    pub d_bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads {
    pub layers: Vec<LayerGrads>,
}

impl NetGrads {
    pub fn zeros_like(net: &DenseNet) -> Self {
        NetGrads {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    d_weights: vec![0.0; l.weights.len()],
                    d_bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &NetGrads) {
        for (a, b) in self.layers.iter_mut().zip(other.layers.iter()) {
            for (x, y) in a.d_weights.iter_mut().zip(b.d_weights.iter()) {
                *x += y;
            }
            for (x, y) in a.d_bias.iter_mut().zip(b.d_bias.iter()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for x in &mut l.d_weights {
                *x *= factor;
            }
            for x in &mut l.d_bias {
                *x *= factor;
            }
        }
    }
}

impl DenseNet {
    /// Initialize from a chain of layer sizes, e.g. `[22, 64, 64, 13]`.
    /// Weights are uniform on (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self, NetError> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(NetError::BadLayerSizes(sizes.to_vec()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (in_dim, out_dim) = (w[0], w[1]);
                let bound = 1.0 / (in_dim as f64).sqrt();
                let weights = (0..in_dim * out_dim)
                    .map(|_| bound * (2.0 * rng.gen::<f64>() - 1.0))
                    .collect();
                Layer { weights, bias: vec![0.0; out_dim], out_dim, in_dim }
            })
            .collect();
        Ok(DenseNet { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.out_dim));
        sizes
    }

    /// All parameters flattened per layer as weights-then-bias.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Rebuild a net from `flatten_params` output and the layer shapes
    /// `(out_dim, in_dim)` in order.
    pub fn from_flat(shapes: &[(usize, usize)], params: &[f64]) -> Result<Self, NetError> {
        let expected: usize = shapes.iter().map(|&(o, i)| o * i + o).sum();
        if expected != params.len() || shapes.is_empty() {
            return Err(NetError::GradShape);
        }
        let mut offset = 0;
        let mut layers = Vec::with_capacity(shapes.len());
        for &(out_dim, in_dim) in shapes {
            let w_len = out_dim * in_dim;
            let weights = params[offset..offset + w_len].to_vec();
            offset += w_len;
            let bias = params[offset..offset + out_dim].to_vec();
            offset += out_dim;
            layers.push(Layer { weights, bias, out_dim, in_dim });
        }
        Ok(DenseNet { layers })
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache), NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::InputDim { got: x.len(), expected: self.input_dim() });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut activation = x.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.out_dim];
            layer.matvec(&activation, &mut z);
            pre.push(z.clone());
            if idx + 1 < self.layers.len() {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            activation = z;
        }
        Ok((activation, ForwardCache { input: x.to_vec(), pre }))
    }

    /// Evaluate without keeping a cache.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::InputDim { got: x.len(), expected: self.input_dim() });
        }
        let mut activation = x.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.out_dim];
            layer.matvec(&activation, &mut z);
            if idx + 1 < self.layers.len() {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            activation = z;
        }
        Ok(activation)
    }

    /// Gradients of `y . dy` with respect to every parameter and the input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        dy: &[f64],
    ) -> Result<(NetGrads, Vec<f64>), NetError> {
        let mut grads = NetGrads::zeros_like(self);
        let dx = self.backward_accumulate(cache, dy, &mut grads)?;
        Ok((grads, dx))
    }

    /// `backward` that adds the parameter gradients into an existing
    /// accumulator instead of allocating one. This is what batched updates
    /// use; a fresh accumulator plus this is exactly `backward`.
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        dy: &[f64],
        grads: &mut NetGrads,
    ) -> Result<Vec<f64>, NetError> {
        if dy.len() != self.output_dim() {
            return Err(NetError::OutputDim { got: dy.len(), expected: self.output_dim() });
        }
        if cache.pre.len() != self.layers.len()
            || cache.input.len() != self.input_dim()
            || cache
                .pre
                .iter()
                .zip(self.layers.iter())
                .any(|(z, l)| z.len() != l.out_dim)
            || grads.layers.len() != self.layers.len()
        {
            return Err(NetError::StaleCache);
        }

        let mut delta = dy.to_vec();
        let mut relu_buf: Vec<f64> = Vec::new();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            // ReLU-activated output of the previous layer (or the input).
            let below: &[f64] = if l == 0 {
                &cache.input
            } else {
                relu_buf.clear();
                relu_buf.extend(cache.pre[l - 1].iter().map(|&z| z.max(0.0)));
                &relu_buf
            };
            let lg = &mut grads.layers[l];
            for r in 0..layer.out_dim {
                let d = delta[r];
                if d != 0.0 {
                    lg.d_bias[r] += d;
                    let row = &mut lg.d_weights[r * layer.in_dim..(r + 1) * layer.in_dim];
                    for (g, a) in row.iter_mut().zip(below.iter()) {
                        *g += d * a;
                    }
                }
            }
            let mut d_below = vec![0.0; layer.in_dim];
            for r in 0..layer.out_dim {
                let d = delta[r];
                if d != 0.0 {
                    let row = &layer.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
                    for (db, w) in d_below.iter_mut().zip(row.iter()) {
                        *db += d * w;
                    }
                }
            }
            if l > 0 {
                for (db, &z) in d_below.iter_mut().zip(cache.pre[l - 1].iter()) {
                    if z <= 0.0 {
                        *db = 0.0;
                    }
                }
            }
            delta = d_below;
        }
        Ok(delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let a = DenseNet::init(&[4, 64, 64, 9], 1).unwrap();
        let b = DenseNet::init(&[4, 64, 64, 9], 1).unwrap();
        assert_eq!(a, b);
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let net = DenseNet::init(&[64, 64, 64, 3], 7).unwrap();
        let max = net.layers[1].weights.iter().fold(0.0f64, |m, &w| m.max(w.abs()));
        assert!(max <= 1.0 / 8.0);
    }

    #[test]
    fn init_rejects_bad_sizes() {
        assert!(DenseNet::init(&[4], 0).is_err());
        assert!(DenseNet::init(&[4, 0, 2], 0).is_err());
    }

    #[test]
    fn zero_net_maps_everything_to_zero() {
        let mut net = DenseNet::init(&[3, 4, 4, 2], 0).unwrap();
        for l in &mut net.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let (y, _) = net.forward(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn relu_gates_negative_preactivations() {
        let net = DenseNet {
            layers: vec![
                Layer { weights: vec![1.0], bias: vec![0.0], out_dim: 1, in_dim: 1 },
                Layer { weights: vec![1.0], bias: vec![0.0], out_dim: 1, in_dim: 1 },
            ],
        };
        let (y, _) = net.forward(&[-5.0]).unwrap();
        assert_eq!(y, vec![0.0]);
        let (y, _) = net.forward(&[5.0]).unwrap();
        assert_eq!(y, vec![5.0]);
    }

    #[test]
    fn forward_matches_hand_rolled_matrix_product() {
        // Independent oracle: explicit nested-loop products on a small net.
        let net = DenseNet::init(&[3, 5, 4, 2], 123).unwrap();
        let x = [0.3, -1.2, 0.7];
        let (y, _) = net.forward(&x).unwrap();

        let dense = |w: &[f64], b: &[f64], input: &[f64], out: usize, inp: usize| -> Vec<f64> {
            (0..out)
                .map(|r| {
                    let mut acc = b[r];
                    for c in 0..inp {
                        acc += w[r * inp + c] * input[c];
                    }
                    acc
                })
                .collect()
        };
        let relu = |v: Vec<f64>| v.into_iter().map(|z| if z > 0.0 { z } else { 0.0 }).collect::<Vec<_>>();
        let l = &net.layers;
        let h1 = relu(dense(&l[0].weights, &l[0].bias, &x, 5, 3));
        let h2 = relu(dense(&l[1].weights, &l[1].bias, &h1, 4, 5));
        let expect = dense(&l[2].weights, &l[2].bias, &h2, 2, 4);
        for (a, b) in y.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let net = DenseNet::init(&[3, 4, 4, 2], 0).unwrap();
        assert_eq!(
            net.forward(&[1.0, 2.0]).unwrap_err(),
            NetError::InputDim { got: 2, expected: 3 }
        );
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let net = DenseNet::init(&[3, 4, 4, 2], 9).unwrap();
        let (_, cache) = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        let (grads, dx) = net.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
        for l in &grads.layers {
            assert!(l.d_weights.iter().all(|&v| v == 0.0));
            assert!(l.d_bias.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_linear_layer_weight_gradient_is_input() {
        let net = DenseNet {
            layers: vec![Layer {
                weights: vec![0.5, -0.25, 0.1, 0.2, 0.3, 0.4],
                bias: vec![0.0, 0.0],
                out_dim: 2,
                in_dim: 3,
            }],
        };
        let x = [1.5, -2.0, 0.5];
        let (_, cache) = net.forward(&x).unwrap();
        let (grads, _) = net.backward(&cache, &[1.0, 0.0]).unwrap();
        assert_eq!(&grads.layers[0].d_weights[0..3], &x);
        assert_eq!(&grads.layers[0].d_weights[3..6], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_stale_cache() {
        let a = DenseNet::init(&[3, 4, 4, 2], 0).unwrap();
        let b = DenseNet::init(&[3, 5, 5, 2], 0).unwrap();
        let (_, cache) = a.forward(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(b.backward(&cache, &[1.0, 0.0]).unwrap_err(), NetError::StaleCache);
    }

    /// Central finite differences on a scalar projection of the output.
    fn numeric_param_grads(net: &DenseNet, x: &[f64], dy: &[f64], h: f64) -> NetGrads {
        let project = |n: &DenseNet| -> f64 {
            let (y, _) = n.forward(x).unwrap();
            y.iter().zip(dy.iter()).map(|(a, b)| a * b).sum()
        };
        let mut grads = NetGrads::zeros_like(net);
        for li in 0..net.layers.len() {
            for wi in 0..net.layers[li].weights.len() {
                let mut plus = net.clone();
                let mut minus = net.clone();
                plus.layers[li].weights[wi] += h;
                minus.layers[li].weights[wi] -= h;
                grads.layers[li].d_weights[wi] = (project(&plus) - project(&minus)) / (2.0 * h);
            }
            for bi in 0..net.layers[li].bias.len() {
                let mut plus = net.clone();
                let mut minus = net.clone();
                plus.layers[li].bias[bi] += h;
                minus.layers[li].bias[bi] -= h;
                grads.layers[li].d_bias[bi] = (project(&plus) - project(&minus)) / (2.0 * h);
            }
        }
        grads
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..20 {
            let net = DenseNet::init(&[4, 6, 5, 3], 1000 + trial).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let dy: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, cache) = net.forward(&x).unwrap();
            let (analytic, dx) = net.backward(&cache, &dy).unwrap();
            let numeric = numeric_param_grads(&net, &x, &dy, 1e-5);
            for (al, nl) in analytic.layers.iter().zip(numeric.layers.iter()) {
                for (a, n) in al.d_weights.iter().zip(nl.d_weights.iter()) {
                    assert!(rel_err(*a, *n) < 1e-4, "weight grad {a} vs {n}");
                }
                for (a, n) in al.d_bias.iter().zip(nl.d_bias.iter()) {
                    assert!(rel_err(*a, *n) < 1e-4, "bias grad {a} vs {n}");
                }
            }
            // Input gradients against the same scalar projection.
            let project = |input: &[f64]| -> f64 {
                let (y, _) = net.forward(input).unwrap();
                y.iter().zip(dy.iter()).map(|(a, b)| a * b).sum()
            };
            for i in 0..x.len() {
                let mut plus = x.clone();
                let mut minus = x.clone();
                plus[i] += 1e-5;
                minus[i] -= 1e-5;
                let n = (project(&plus) - project(&minus)) / 2e-5;
                assert!(rel_err(dx[i], n) < 1e-4, "input grad {} vs {}", dx[i], n);
            }
        }
    }

    #[test]
    fn flatten_roundtrip_is_exact() {
        let net = DenseNet::init(&[5, 8, 8, 4], 77).unwrap();
        let shapes: Vec<(usize, usize)> =
            net.layers.iter().map(|l| (l.out_dim, l.in_dim)).collect();
        let rebuilt = DenseNet::from_flat(&shapes, &net.flatten_params()).unwrap();
        assert_eq!(net, rebuilt);
    }
}
