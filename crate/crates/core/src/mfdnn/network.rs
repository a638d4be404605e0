//! Fully connected ReLU network with hand-written backpropagation.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

pub fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// `a · w + b`, with `w` stored `inputs × outputs` (row-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w.ncols()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Dense>,
}

/// Parameter gradients, laid out like [`Network::layers`].
#[derive(Clone, Debug)]
pub struct Gradients {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

impl Network {
    /// He-initialized network `input → hidden[0] → ... → 1`.
    ///
    /// Hidden biases are drawn from `U(-1, 1)` so that, on standardized
    /// inputs, the ReLU kinks start spread over the data instead of all
    /// passing through the origin. The output bias starts at 0.
    pub fn new(input: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        if input == 0 || hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidArgument(format!(
                "layer widths must be positive (input {input}, hidden {hidden:?})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, d)| {
                let normal = Normal::new(0.0, (2.0 / d[0] as f64).sqrt()).expect("finite std");
                let w = Array2::from_shape_simple_fn((d[0], d[1]), || normal.sample(&mut rng));
                let b = if l == last {
                    Array1::zeros(d[1])
                } else {
                    Array1::from_shape_simple_fn(d[1], || rng.gen_range(-1.0..1.0))
                };
                Dense {
                    w,
                    b,
                    activation: if l == last { Activation::Identity } else { Activation::Relu },
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let net = Self { layers };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        if self.layers.is_empty() {
            return fail("network has no layers".into());
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.b.len() != layer.outputs() {
                return fail(format!("layer {l}: {} biases for {} outputs", layer.b.len(), layer.outputs()));
            }
            if l > 0 && self.layers[l - 1].outputs() != layer.inputs() {
                return fail(format!(
                    "layer {l} takes {} inputs but layer {} gives {}",
                    layer.inputs(),
                    l - 1,
                    self.layers[l - 1].outputs()
                ));
            }
        }
        if self.output_dim() != 1 {
            return fail(format!("network must end in 1 output, got {}", self.output_dim()));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Dense::outputs)
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(Dense::outputs).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// `Σ w²` over every weight (biases excluded).
    pub fn weight_norm2(&self) -> f64 {
        self.layers.iter().map(|l| l.w.iter().map(|w| w * w).sum::<f64>()).sum()
    }

    /// Same arithmetic as a one-row [`Network::forward_batch`], so single and
    /// batched predictions agree bit for bit.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dim(), x.len())?;
        let row = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
        Ok(self.forward_batch(row)?[0])
    }

    /// Row-wise forward pass over an `n × input` batch.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.input_dim(), x.ncols())?;
        let mut a = x.to_owned();
        for layer in &self.layers {
            a = layer_forward(layer, a.view());
        }
        Ok(a.column(0).to_owned())
    }

    /// Mean squared error over the batch and its gradient.
    pub fn mse_gradient(&self, x: ArrayView2<'_, f64>, y: &Array1<f64>) -> Result<(f64, Gradients)> {
        check_dim(self.input_dim(), x.ncols())?;
        check_dim(x.nrows(), y.len())?;
        let n = x.nrows() as f64;
        // activations a_0 = x, a_1, ..., a_L
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for layer in &self.layers {
            let next = layer_forward(layer, acts.last().unwrap().view());
            acts.push(next);
        }
        let out = acts.last().unwrap().column(0).to_owned();
        let resid = &out - y;
        let loss = resid.iter().map(|r| r * r).sum::<f64>() / n;

        let mut delta = resid.insert_axis(Axis(1)) * (2.0 / n);
        let mut gw = vec![Array2::zeros((0, 0)); self.layers.len()];
        let mut gb = vec![Array1::zeros(0); self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            if layer.activation == Activation::Relu {
                // a_{l+1} = relu(z), and relu'(z) = 1 exactly where a_{l+1} > 0
                delta.zip_mut_with(&acts[l + 1], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            gw[l] = acts[l].t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                delta = delta.dot(&layer.w.t());
            }
        }
        Ok((loss, Gradients { w: gw, b: gb }))
    }
}

fn layer_forward(layer: &Dense, a: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut z = a.dot(&layer.w);
    z += &layer.b;
    if layer.activation == Activation::Relu {
        z.mapv_inplace(relu);
    }
    z
}

/// ADAM with the usual bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Network, learning_rate: f64) -> Self {
        let zeros = Gradients {
            w: net.layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            b: net.layers.iter().map(|l| Array1::zeros(l.b.len())).collect(),
        };
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut Network, g: &Gradients) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.learning_rate;
        let eps = self.eps;
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (l, layer) in net.layers.iter_mut().enumerate() {
            ndarray::Zip::from(&mut layer.w)
                .and(&g.w[l])
                .and(&mut self.m.w[l])
                .and(&mut self.v.w[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.b)
                .and(&g.b[l])
                .and(&mut self.m.b[l])
                .and(&mut self.v.b[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    #[test]
    fn relu_cases() {
        assert_eq!(relu(-1.0), 0.0);
        assert_eq!(relu(2.0), 2.0);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut net = Network::new(3, &[4, 2], 1).unwrap();
        for l in net.layers_mut() {
            l.w.fill(0.0);
            l.b.fill(0.0);
        }
        assert_eq!(net.forward(&[1.0, -2.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn affine_layer() {
        let net = Network::from_layers(vec![Dense {
            w: array![[2.0]],
            b: array![1.0],
            activation: Activation::Identity,
        }])
        .unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), 7.0);
        assert!(net.forward(&[3.0, 1.0]).is_err());
    }

    #[test]
    fn chained_dimensions_are_checked() {
        let bad = Network::from_layers(vec![
            Dense {
                w: Array2::zeros((2, 3)),
                b: Array1::zeros(3),
                activation: Activation::Relu,
            },
            Dense {
                w: Array2::zeros((4, 1)),
                b: Array1::zeros(1),
                activation: Activation::Identity,
            },
        ]);
        assert!(bad.is_err());
    }

    #[test]
    fn batch_matches_single() {
        let net = Network::new(2, &[5, 3], 4).unwrap();
        let x = array![[0.1, -0.4], [1.5, 2.0], [-0.3, 0.0]];
        let batch = net.forward_batch(x.view()).unwrap();
        for i in 0..3 {
            let row: Vec<f64> = x.row(i).to_vec();
            assert_eq!(batch[i], net.forward(&row).unwrap());
        }
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        for trial in 0..40 {
            if checked == 10 {
                break;
            }
            let mut net = Network::new(2, &[6], 100 + trial).unwrap();
            for l in net.layers_mut() {
                l.b.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
            }
            let x = Array2::from_shape_fn((7, 2), |_| rng.gen_range(-1.0..1.0));
            let y = Array1::from_shape_fn(7, |_| rng.gen_range(-1.0..1.0));
            let (_, g) = net.mse_gradient(x.view(), &y).unwrap();
            let loss = |n: &Network| {
                let p = n.forward_batch(x.view()).unwrap();
                (&p - &y).mapv(|r| r * r).sum() / 7.0
            };
            // keep every pre-activation away from the ReLU kink
            let min_margin = {
                let h = x.dot(&net.layers()[0].w) + &net.layers()[0].b;
                h.iter().fold(f64::INFINITY, |m, z| m.min(z.abs()))
            };
            if min_margin < 1e-3 {
                continue;
            }
            checked += 1;
            let h = 1e-6;
            for l in 0..2 {
                let (r, c) = net.layers()[l].w.dim();
                for i in 0..r {
                    for j in 0..c {
                        let mut up = net.clone();
                        up.layers_mut()[l].w[[i, j]] += h;
                        let mut dn = net.clone();
                        dn.layers_mut()[l].w[[i, j]] -= h;
                        let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
                        let a = g.w[l][[i, j]];
                        assert!((fd - a).abs() <= 1e-5 * a.abs().max(1e-3), "w{l}[{i},{j}]: {fd} vs {a}");
                    }
                }
                for j in 0..net.layers()[l].b.len() {
                    let mut up = net.clone();
                    up.layers_mut()[l].b[j] += h;
                    let mut dn = net.clone();
                    dn.layers_mut()[l].b[j] -= h;
                    let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
                    let a = g.b[l][j];
                    assert!((fd - a).abs() <= 1e-5 * a.abs().max(1e-3), "b{l}[{j}]: {fd} vs {a}");
                }
            }
        }
        assert_eq!(checked, 10);
    }

    #[test]
    fn adam_reduces_loss() {
        let mut net = Network::new(1, &[8], 2).unwrap();
        let x = Array2::from_shape_fn((20, 1), |(i, _)| i as f64 / 19.0);
        let y = x.column(0).mapv(|v| 3.0 * v - 1.0);
        let mut adam = Adam::new(&net, 1e-2);
        let (first, _) = net.mse_gradient(x.view(), &y).unwrap();
        let mut last = first;
        for _ in 0..500 {
            let (l, g) = net.mse_gradient(x.view(), &y).unwrap();
            adam.step(&mut net, &g);
            last = l;
        }
        assert!(last < 1e-2 * first, "{first} -> {last}");
    }
}
