//! Fully connected stacks with SiLU hidden activations, batched over rows.

use serde::{Deserialize, Serialize};

use super::matrix::{affine_forward, affine_input_grad, affine_param_grad, Matrix};
use super::params::{total_len, LayerShape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "silu")]
    SiLU,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::SiLU => x * sigmoid(x),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::SiLU => {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            }
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden_dims.contains(&0) {
            return Err(Error::invalid("mlp", "all layer widths must be at least 1"));
        }
        Ok(Self {
            input_dim,
            hidden_dims,
            output_dim,
            activation: Activation::SiLU,
        })
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims.windows(2)
            .map(|w| LayerShape::new(w[1], w[0]))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        total_len(&self.layer_shapes())
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }

    /// Batched forward pass recording everything the backward pass needs.
    pub fn forward(&self, params: &[f64], input: Matrix) -> Result<MlpTape> {
        if params.len() != self.num_params() {
            return Err(Error::shape("mlp parameters", self.num_params(), params.len()));
        }
        if input.cols() != self.input_dim {
            return Err(Error::shape("mlp input", self.input_dim, input.cols()));
        }
        let shapes = self.layer_shapes();
        let last = shapes.len() - 1;
        let mut acts = Vec::with_capacity(shapes.len() + 1);
        let mut pre = Vec::with_capacity(last);
        acts.push(input);
        let mut offset = 0;
        for (l, shape) in shapes.iter().enumerate() {
            let (w, b) = params[offset..offset + shape.len()].split_at(shape.rows * shape.cols);
            offset += shape.len();
            let prev = &acts[l];
            let mut z = Matrix::zeros(prev.rows(), shape.rows);
            affine_forward(prev, w, b, &mut z);
            if l < last {
                // keep z and σ(z) so the backward pass needs no further exp
                let mut a = z.clone();
                let mut gate = z.clone();
                match self.activation {
                    Activation::SiLU => {
                        for ((av, gv), &zv) in a.as_mut_slice().iter_mut().zip(gate.as_mut_slice()).zip(z.as_slice()) {
                            let s = sigmoid(zv);
                            *gv = s;
                            *av = zv * s;
                        }
                    }
                }
                pre.push((z, gate));
                acts.push(a);
            } else {
                acts.push(z);
            }
        }
        Ok(MlpTape { acts, pre })
    }

    /// Reverse accumulation through a recorded pass.
    ///
    /// `d_out` is the gradient of the scalar objective with respect to the
    /// output rows. Parameter gradients are added into `grad` when given; the
    /// input gradient is returned when `want_input` is set.
    pub fn backward(
        &self,
        params: &[f64],
        tape: &MlpTape,
        d_out: Matrix,
        mut grad: Option<&mut [f64]>,
        want_input: bool,
    ) -> Option<Matrix> {
        let shapes = self.layer_shapes();
        let last = shapes.len() - 1;
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut acc = 0;
        for s in &shapes {
            offsets.push(acc);
            acc += s.len();
        }
        debug_assert_eq!(d_out.cols(), self.output_dim);
        let mut delta = d_out;
        for l in (0..shapes.len()).rev() {
            let shape = shapes[l];
            if l < last {
                let (z, gate) = &tape.pre[l];
                for ((d, &zv), &s) in delta.as_mut_slice().iter_mut().zip(z.as_slice()).zip(gate.as_slice()) {
                    *d *= s * (1.0 + zv * (1.0 - s));
                }
            }
            let block = offsets[l]..offsets[l] + shape.len();
            if let Some(g) = grad.as_deref_mut() {
                let (gw, gb) = g[block.clone()].split_at_mut(shape.rows * shape.cols);
                affine_param_grad(&tape.acts[l], &delta, gw, gb);
            }
            if l > 0 || want_input {
                let w = &params[block.start..block.start + shape.rows * shape.cols];
                delta = affine_input_grad(&delta, w, shape.cols);
            } else {
                return None;
            }
        }
        Some(delta)
    }
}

/// Activations recorded by [`MlpSpec::forward`].
#[derive(Debug, Clone)]
pub struct MlpTape {
    acts: Vec<Matrix>,
    /// Pre-activation and sigmoid gate of each hidden layer.
    pre: Vec<(Matrix, Matrix)>,
}

impl MlpTape {
    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("tape always holds the input")
    }

    pub fn input(&self) -> &Matrix {
        &self.acts[0]
    }
}
