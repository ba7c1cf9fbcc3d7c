use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Matrix, Params};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }
}

/// Affine map followed by an elementwise activation; `weight` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Activations recorded by [`Mlp::forward`]: the input and output of every
/// layer. Enough to run the exact backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<Matrix>,
    outputs: Vec<Matrix>,
    dims: Vec<(usize, usize)>,
}

impl Tape {
    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::rows)
    }

    pub fn output(&self) -> &Matrix {
        self.outputs.last().expect("tape of an empty network")
    }
}

impl Mlp {
    /// Network with layer widths `dims` (`dims[0]` inputs, last entry
    /// outputs). Hidden layers use `hidden`, the output layer is identity.
    /// Weights are Glorot-uniform, biases zero.
    pub fn new(dims: &[usize], hidden: Activation, rng: &mut Rng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output widths");
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (dims[i], dims[i + 1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight = Matrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-a..a));
                Layer {
                    weight,
                    bias: vec![0.0; fan_out],
                    activation: if i + 1 == n { Activation::Identity } else { hidden },
                }
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("Mlp::from_layers", "no layers"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::shape(
                    "Mlp::from_layers",
                    l.out_dim(),
                    format!("bias of length {} in layer {i}", l.bias.len()),
                ));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::shape(
                    "Mlp::from_layers",
                    format!("layer {} input {}", i + 1, w[0].out_dim()),
                    w[1].in_dim(),
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_dim)
    }

    /// All-zero network with the same shapes; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, Tape)> {
        if input.cols() != self.in_dim() {
            return Err(Error::shape(
                "mlp_forward",
                format!("{} input columns", self.in_dim()),
                input.cols(),
            ));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut h = input.clone();
        for layer in &self.layers {
            let mut pre = h.matmul_nt(&layer.weight)?;
            for row in pre.as_mut_slice().chunks_exact_mut(layer.out_dim()) {
                for (v, b) in row.iter_mut().zip(&layer.bias) {
                    *v = layer.activation.apply(*v + b);
                }
            }
            inputs.push(h);
            h = pre;
            outputs.push(h.clone());
        }
        let dims = self.layers.iter().map(|l| (l.out_dim(), l.in_dim())).collect();
        Ok((h, Tape { inputs, outputs, dims }))
    }

    /// Output only, no tape.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim() {
            return Err(Error::shape(
                "mlp_forward",
                format!("{} input columns", self.in_dim()),
                input.cols(),
            ));
        }
        let mut h = input.clone();
        for layer in &self.layers {
            let mut pre = h.matmul_nt(&layer.weight)?;
            for row in pre.as_mut_slice().chunks_exact_mut(layer.out_dim()) {
                for (v, b) in row.iter_mut().zip(&layer.bias) {
                    *v = layer.activation.apply(*v + b);
                }
            }
            h = pre;
        }
        Ok(h)
    }

    /// Gradients of `sum(upstream ⊙ output)` with respect to every parameter
    /// (summed over batch rows) and to the input.
    pub fn backward(&self, tape: &Tape, upstream: &Matrix) -> Result<(Mlp, Matrix)> {
        let dims: Vec<_> = self.layers.iter().map(|l| (l.out_dim(), l.in_dim())).collect();
        if dims != tape.dims {
            return Err(Error::contract(
                "mlp_backward",
                "tape was recorded for a network of different shape",
            ));
        }
        let batch = tape.batch_size();
        if upstream.shape() != (batch, self.out_dim()) {
            return Err(Error::shape(
                "mlp_backward",
                format!("upstream {}x{}", batch, self.out_dim()),
                format!("{}x{}", upstream.rows(), upstream.cols()),
            ));
        }
        let mut grads = self.zeros_like();
        let mut g = upstream.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Tanh {
                for (gv, y) in g.as_mut_slice().iter_mut().zip(tape.outputs[idx].as_slice()) {
                    *gv *= 1.0 - y * y;
                }
            }
            let gl = &mut grads.layers[idx];
            gl.weight = g.matmul_tn(&tape.inputs[idx])?;
            for row in g.row_iter() {
                for (b, v) in gl.bias.iter_mut().zip(row) {
                    *b += v;
                }
            }
            g = g.matmul(&layer.weight)?;
        }
        Ok((grads, g))
    }
}

impl Params for Mlp {
    fn arrays(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("{i}.weight"), l.weight.as_slice()));
            out.push((format!("{i}.bias"), l.bias.as_slice()));
        }
        out
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.weight.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }
}
