//! Dense feed-forward networks with explicit forward/backward passes.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::Rng;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    fn apply(self, m: &mut Array2<f64>) {
        match self {
            Activation::Relu => m.mapv_inplace(|v| v.max(0.0)),
            Activation::Identity => {}
            Activation::Sigmoid => m.mapv_inplace(sigmoid),
        }
    }

    /// Multiplies `grad` in place by the derivative, expressed through the
    /// layer output.
    fn backprop(self, output: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Relu => Zip::from(grad).and(output).for_each(|g, &o| {
                if o <= 0.0 {
                    *g = 0.0;
                }
            }),
            Activation::Identity => {}
            Activation::Sigmoid => {
                Zip::from(grad)
                    .and(output)
                    .for_each(|g, &o| *g *= o * (1.0 - o))
            }
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Weights of one affine layer, `out_dim × in_dim`, plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LayerParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.in_dim(), self.out_dim())
    }
}

/// Everything a backward pass needs: `values[0]` is the input batch and
/// `values[l + 1]` the post-activation output of layer `l`.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub values: Vec<Array2<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &Array2<f64> {
        self.values.last().expect("forward pass always holds the input")
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
    pub input: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<LayerParams>,
    pub activations: Vec<Activation>,
}

impl Mlp {
    /// `sizes = [in, h1, ..., out]`; hidden layers use `hidden`, the last one
    /// `output`. Weights are He-uniform, biases zero.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "network needs at least an input and an output size, got {sizes:?}"
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("zero layer size in {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let mut layers = Vec::with_capacity(n);
        let mut activations = Vec::with_capacity(n);
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let weights = Array2::from_shape_fn((fan_out, fan_in), |_| dist.sample(rng));
            layers.push(LayerParams {
                weights,
                bias: Array1::zeros(fan_out),
            });
            activations.push(if l + 1 == n { output } else { hidden });
        }
        Ok(Self { layers, activations })
    }

    pub fn from_layers(layers: Vec<LayerParams>, activations: Vec<Activation>) -> Result<Self> {
        if layers.len() != activations.len() || layers.is_empty() {
            return Err(Error::Shape(format!(
                "{} layers but {} activations",
                layers.len(),
                activations.len()
            )));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::LayerShape {
                    layer: l + 1,
                    expected: pair[1].in_dim(),
                    got: pair[0].out_dim(),
                });
            }
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::Shape(format!("layer {l}: bias length {} != {}", layer.bias.len(), layer.out_dim())));
            }
        }
        Ok(Self { layers, activations })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(LayerParams::out_dim).unwrap_or(0)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.in_dim()];
        s.extend(self.layers.iter().map(LayerParams::out_dim));
        s
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(LayerParams::len).sum()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<ForwardPass> {
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.to_owned());
        for (l, (layer, act)) in self.layers.iter().zip(&self.activations).enumerate() {
            let input = values.last().unwrap();
            if input.ncols() != layer.in_dim() {
                return Err(Error::LayerShape {
                    layer: l,
                    expected: layer.in_dim(),
                    got: input.ncols(),
                });
            }
            let mut out = input.dot(&layer.weights.t());
            out += &layer.bias;
            act.apply(&mut out);
            values.push(out);
        }
        Ok(ForwardPass { values })
    }

    /// Output only; skips keeping the intermediate activations.
    pub fn infer(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut cur = x.to_owned();
        for (l, (layer, act)) in self.layers.iter().zip(&self.activations).enumerate() {
            if cur.ncols() != layer.in_dim() {
                return Err(Error::LayerShape {
                    layer: l,
                    expected: layer.in_dim(),
                    got: cur.ncols(),
                });
            }
            let mut out = cur.dot(&layer.weights.t());
            out += &layer.bias;
            act.apply(&mut out);
            cur = out;
        }
        Ok(cur)
    }

    /// Backpropagates `upstream = ∂L/∂output` through a pass produced by
    /// [`Mlp::forward`] on this network.
    pub fn backward(&self, pass: &ForwardPass, upstream: &Array2<f64>) -> Result<Gradients> {
        if pass.values.len() != self.layers.len() + 1 {
            return Err(Error::Shape(format!(
                "forward pass has {} stages, network has {} layers",
                pass.values.len(),
                self.layers.len()
            )));
        }
        let out = pass.output();
        if upstream.dim() != out.dim() {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.dim(),
                out.dim()
            )));
        }
        let mut grads: Vec<LayerParams> = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for l in (0..self.layers.len()).rev() {
            self.activations[l].backprop(&pass.values[l + 1], &mut delta);
            let input = &pass.values[l];
            let weights = delta.t().dot(input);
            let bias = delta.sum_axis(Axis(0));
            let next = delta.dot(&self.layers[l].weights);
            grads.push(LayerParams { weights, bias });
            delta = next;
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: delta,
        })
    }

    /// Parameters in a fixed order: per layer, row-major weights then bias.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_flat(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "flat parameter vector has {} entries, network has {}",
                theta.len(),
                self.num_params()
            )));
        }
        let mut off = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = theta[off];
                off += 1;
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> MlpSnapshot {
        MlpSnapshot {
            layer_sizes: self.sizes(),
            activations: self.activations.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerSnapshot {
                    rows: l.out_dim(),
                    cols: l.in_dim(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_snapshot(snap: &MlpSnapshot) -> Result<Self> {
        let mut layers = Vec::with_capacity(snap.layers.len());
        for (l, s) in snap.layers.iter().enumerate() {
            let weights = Array2::from_shape_vec((s.rows, s.cols), s.weights.clone())
                .map_err(|e| Error::Shape(format!("layer {l}: {e}")))?;
            layers.push(LayerParams {
                weights,
                bias: Array1::from(s.bias.clone()),
            });
        }
        let mlp = Mlp::from_layers(layers, snap.activations.clone())?;
        if mlp.sizes() != snap.layer_sizes {
            return Err(Error::Shape(format!(
                "snapshot header sizes {:?} disagree with layers {:?}",
                snap.layer_sizes,
                mlp.sizes()
            )));
        }
        Ok(mlp)
    }
}

pub fn flatten_layers(layers: &[LayerParams]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
        .collect()
}

/// Serializable parameter dump: header with layer sizes and activation
/// names, then row-major weights per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSnapshot {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub layers: Vec<LayerSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSnapshot {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}
