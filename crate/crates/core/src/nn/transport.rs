//! Transport map network `T(x, z)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::mlp::{MlpSpec, MlpTape};
use super::params::{LayerShape, ParameterStore};
use super::value::DEFAULT_WIDTH;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportNet {
    pub body: MlpSpec,
    pub z_dim: usize,
}

impl TransportNet {
    /// Three hidden layers of `width` mapping `R^(dim + z_dim)` to `R^dim`.
    pub fn new(dim: usize, width: usize, z_dim: usize) -> Result<Self> {
        Ok(Self {
            body: MlpSpec::new(dim + z_dim, vec![width; 3], dim)?,
            z_dim,
        })
    }

    pub fn standard(dim: usize, z_dim: usize) -> Self {
        Self::new(dim, DEFAULT_WIDTH, z_dim).expect("standard widths are valid")
    }

    pub fn dim(&self) -> usize {
        self.body.output_dim
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        self.body.layer_shapes()
    }

    pub fn num_params(&self) -> usize {
        self.body.num_params()
    }

    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterStore {
        ParameterStore::init_uniform_fan_in(self.layer_shapes(), rng)
    }

    pub fn zero_params(&self) -> ParameterStore {
        ParameterStore::zeros(self.layer_shapes())
    }

    fn check_params(&self, params: &ParameterStore) -> Result<()> {
        if params.shapes() != self.layer_shapes().as_slice() {
            return Err(Error::shape("transport net parameters", self.num_params(), params.len()));
        }
        Ok(())
    }

    /// Batched forward pass; `noise` must be present iff `z_dim > 0`.
    pub fn record(&self, params: &ParameterStore, points: &Matrix, noise: Option<&Matrix>) -> Result<MlpTape> {
        self.check_params(params)?;
        if points.cols() != self.dim() {
            return Err(Error::shape("transport input dimension", self.dim(), points.cols()));
        }
        let input = match (self.z_dim, noise) {
            (0, None) => points.clone(),
            (0, Some(z)) if z.cols() == 0 => points.clone(),
            (k, Some(z)) => {
                if z.cols() != k {
                    return Err(Error::shape("auxiliary variable", k, z.cols()));
                }
                if z.rows() != points.rows() {
                    return Err(Error::shape("auxiliary batch", points.rows(), z.rows()));
                }
                points.hcat(z)
            }
            (k, None) => return Err(Error::shape("auxiliary variable", k, 0)),
        };
        self.body.forward(params.values(), input)
    }

    /// Accumulates parameter gradients of an objective whose gradient with
    /// respect to the outputs is `d_out`.
    pub fn backward(&self, params: &ParameterStore, tape: &MlpTape, d_out: Matrix, grad: &mut [f64]) {
        self.body.backward(params.values(), tape, d_out, Some(grad), false);
    }

    pub fn map_batch(&self, params: &ParameterStore, points: &Matrix, noise: Option<&Matrix>) -> Result<Matrix> {
        Ok(self.record(params, points, noise)?.output().clone())
    }

    /// `T(x, z)` for a single point.
    pub fn forward_transport(&self, params: &ParameterStore, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::shape("transport input dimension", self.dim(), x.len()));
        }
        if z.len() != self.z_dim {
            return Err(Error::shape("auxiliary variable", self.z_dim, z.len()));
        }
        let xm = Matrix::from_vec(1, x.len(), x.to_vec());
        let zm = Matrix::from_vec(1, z.len(), z.to_vec());
        let noise = (self.z_dim > 0).then_some(&zm);
        Ok(self.map_batch(params, &xm, noise)?.row(0).to_vec())
    }
}
