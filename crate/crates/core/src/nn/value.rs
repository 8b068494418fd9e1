//! Time-conditioned scalar value network `V(t, x)`.
//!
//! `V(t, x) = head(x_embed(x) + t_mlp(embed(t)))`. Queries are expressed as a
//! set of distinct points, a set of distinct times, and index pairs picking
//! one of each per output row, so stencils that reuse a point or a time only
//! pay for the shared embedding once.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::embed::{check_dim, embedding_dt, fill_embedding};
use super::matrix::Matrix;
use super::mlp::{MlpSpec, MlpTape};
use super::params::{LayerShape, ParameterStore};
use crate::error::{Error, Result};

pub const DEFAULT_WIDTH: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueNet {
    pub x_embed: MlpSpec,
    pub t_embed_dim: usize,
    pub t_mlp: MlpSpec,
    pub head: MlpSpec,
}

/// Rows to evaluate: row `r` is `V(times[t_index[r]], points[x_index[r]])`.
#[derive(Debug, Clone)]
pub struct ValueQuery {
    pub points: Matrix,
    pub times: Vec<f64>,
    pub x_index: Vec<usize>,
    pub t_index: Vec<usize>,
}

impl ValueQuery {
    /// One row per `(times[i], points[i])`.
    pub fn paired(times: Vec<f64>, points: Matrix) -> Self {
        let idx: Vec<usize> = (0..times.len()).collect();
        Self {
            points,
            times,
            x_index: idx.clone(),
            t_index: idx,
        }
    }

    pub fn len(&self) -> usize {
        self.x_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_index.is_empty()
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.points.cols() != dim {
            return Err(Error::shape("value net point dimension", dim, self.points.cols()));
        }
        if self.x_index.len() != self.t_index.len() {
            return Err(Error::shape(
                "value query index pairs",
                self.x_index.len(),
                self.t_index.len(),
            ));
        }
        if self.x_index.iter().any(|&i| i >= self.points.rows())
            || self.t_index.iter().any(|&i| i >= self.times.len())
        {
            return Err(Error::invalid("value query", "index out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ValueTape {
    x_tape: MlpTape,
    t_tape: MlpTape,
    head_tape: MlpTape,
    times: Vec<f64>,
    x_index: Vec<usize>,
    t_index: Vec<usize>,
}

impl ValueTape {
    pub fn values(&self) -> &[f64] {
        self.head_tape.output().as_slice()
    }
}

/// Gradients of an objective with respect to the query's points and times.
#[derive(Debug, Clone)]
pub struct ValueInputGrad {
    pub points: Matrix,
    pub times: Vec<f64>,
}

impl ValueNet {
    pub fn new(dim: usize, width: usize, t_embed_dim: usize) -> Result<Self> {
        check_dim(t_embed_dim)?;
        Ok(Self {
            x_embed: MlpSpec::new(dim, vec![width], width)?,
            t_embed_dim,
            t_mlp: MlpSpec::new(t_embed_dim, vec![width], width)?,
            head: MlpSpec::new(width, vec![width, width], 1)?,
        })
    }

    /// Width-128 network with a 128-dimensional time embedding.
    pub fn standard(dim: usize) -> Self {
        Self::new(dim, DEFAULT_WIDTH, DEFAULT_WIDTH).expect("standard widths are valid")
    }

    pub fn dim(&self) -> usize {
        self.x_embed.input_dim
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let mut s = self.x_embed.layer_shapes();
        s.extend(self.t_mlp.layer_shapes());
        s.extend(self.head.layer_shapes());
        s
    }

    pub fn num_params(&self) -> usize {
        self.x_embed.num_params() + self.t_mlp.num_params() + self.head.num_params()
    }

    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterStore {
        ParameterStore::init_uniform_fan_in(self.layer_shapes(), rng)
    }

    pub fn zero_params(&self) -> ParameterStore {
        ParameterStore::zeros(self.layer_shapes())
    }

    fn check_params(&self, params: &ParameterStore) -> Result<()> {
        if params.shapes() != self.layer_shapes().as_slice() {
            return Err(Error::shape("value net parameters", self.num_params(), params.len()));
        }
        Ok(())
    }

    fn split<'a>(&self, flat: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let (x, rest) = flat.split_at(self.x_embed.num_params());
        let (t, h) = rest.split_at(self.t_mlp.num_params());
        (x, t, h)
    }

    fn split_mut<'a>(&self, flat: &'a mut [f64]) -> (&'a mut [f64], &'a mut [f64], &'a mut [f64]) {
        let (x, rest) = flat.split_at_mut(self.x_embed.num_params());
        let (t, h) = rest.split_at_mut(self.t_mlp.num_params());
        (x, t, h)
    }

    /// Evaluates every row of `query`, keeping the activations for a backward pass.
    pub fn record(&self, params: &ParameterStore, query: ValueQuery) -> Result<ValueTape> {
        self.check_params(params)?;
        query.validate(self.dim())?;
        let (px, pt, ph) = self.split(params.values());

        let mut emb = Matrix::zeros(query.times.len(), self.t_embed_dim);
        for (i, &t) in query.times.iter().enumerate() {
            fill_embedding(t, emb.row_mut(i));
        }
        let x_tape = self.x_embed.forward(px, query.points)?;
        let t_tape = self.t_mlp.forward(pt, emb)?;

        let width = self.head.input_dim;
        let mut h = Matrix::zeros(query.x_index.len(), width);
        let (xe, te) = (x_tape.output(), t_tape.output());
        for (r, (&i, &j)) in query.x_index.iter().zip(&query.t_index).enumerate() {
            for ((o, a), b) in h.row_mut(r).iter_mut().zip(xe.row(i)).zip(te.row(j)) {
                *o = a + b;
            }
        }
        let head_tape = self.head.forward(ph, h)?;
        Ok(ValueTape {
            x_tape,
            t_tape,
            head_tape,
            times: query.times,
            x_index: query.x_index,
            t_index: query.t_index,
        })
    }

    /// Pulls `d_values` (one entry per query row) back through a recorded
    /// evaluation. Parameter gradients accumulate into `grad`.
    pub fn backward(
        &self,
        params: &ParameterStore,
        tape: &ValueTape,
        d_values: &[f64],
        grad: Option<&mut [f64]>,
        want_inputs: bool,
    ) -> Option<ValueInputGrad> {
        assert_eq!(d_values.len(), tape.x_index.len(), "one upstream gradient per row");
        let (px, pt, ph) = self.split(params.values());
        let (mut gx, mut gt, mut gh) = match grad {
            Some(g) => {
                let (a, b, c) = self.split_mut(g);
                (Some(a), Some(b), Some(c))
            }
            None => (None, None, None),
        };
        let d_out = Matrix::from_vec(d_values.len(), 1, d_values.to_vec());
        let d_h = self
            .head
            .backward(ph, &tape.head_tape, d_out, gh.as_deref_mut(), true)
            .expect("input gradient requested");

        let width = self.head.input_dim;
        let mut d_xe = Matrix::zeros(tape.x_tape.output().rows(), width);
        let mut d_te = Matrix::zeros(tape.t_tape.output().rows(), width);
        for (r, (&i, &j)) in tape.x_index.iter().zip(&tape.t_index).enumerate() {
            let src = d_h.row(r);
            for (o, d) in d_xe.row_mut(i).iter_mut().zip(src) {
                *o += d;
            }
            for (o, d) in d_te.row_mut(j).iter_mut().zip(src) {
                *o += d;
            }
        }
        let d_points = self
            .x_embed
            .backward(px, &tape.x_tape, d_xe, gx.as_deref_mut(), want_inputs);
        let d_emb = self
            .t_mlp
            .backward(pt, &tape.t_tape, d_te, gt.as_deref_mut(), want_inputs);
        match (d_points, d_emb) {
            (Some(points), Some(d_emb)) => {
                let times = tape
                    .times
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| embedding_dt(t, d_emb.row(i)))
                    .collect();
                Some(ValueInputGrad { points, times })
            }
            _ => None,
        }
    }

    /// Batched `V(times[i], points[i])`.
    pub fn eval_batch(&self, params: &ParameterStore, times: &[f64], points: &Matrix) -> Result<Vec<f64>> {
        if times.len() != points.rows() {
            return Err(Error::shape("value net batch", points.rows(), times.len()));
        }
        let tape = self.record(params, ValueQuery::paired(times.to_vec(), points.clone()))?;
        Ok(tape.values().to_vec())
    }

    /// `V(t, x)` for a single point.
    pub fn forward_value(&self, params: &ParameterStore, t: f64, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::shape("value net point dimension", self.dim(), x.len()));
        }
        let q = ValueQuery::paired(vec![t], Matrix::from_vec(1, x.len(), x.to_vec()));
        Ok(self.record(params, q)?.values()[0])
    }

    /// `(∂V/∂t, ∇ₓV)` at a single point by reverse accumulation.
    pub fn grad_input_value(&self, params: &ParameterStore, t: f64, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.dim() {
            return Err(Error::shape("value net point dimension", self.dim(), x.len()));
        }
        let q = ValueQuery::paired(vec![t], Matrix::from_vec(1, x.len(), x.to_vec()));
        let tape = self.record(params, q)?;
        let g = self
            .backward(params, &tape, &[1.0], None, true)
            .expect("input gradient requested");
        Ok((g.times[0], g.points.row(0).to_vec()))
    }

    /// Batched `(∂V/∂t, ∇ₓV)` at `(times[i], points[i])`.
    pub fn grad_input_batch(
        &self,
        params: &ParameterStore,
        times: &[f64],
        points: &Matrix,
    ) -> Result<(Vec<f64>, Matrix)> {
        if times.len() != points.rows() {
            return Err(Error::shape("value net batch", points.rows(), times.len()));
        }
        let tape = self.record(params, ValueQuery::paired(times.to_vec(), points.clone()))?;
        let ones = vec![1.0; times.len()];
        let g = self
            .backward(params, &tape, &ones, None, true)
            .expect("input gradient requested");
        Ok((g.times, g.points))
    }
}
