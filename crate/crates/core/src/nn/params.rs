use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight block of one dense layer: `rows × cols` weights followed by `rows` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub rows: usize,
    pub cols: usize,
}

impl LayerShape {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    #[inline]
    pub const fn len(&self) -> usize {
        self.rows * self.cols + self.rows
    }

    #[inline]
    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat parameter vector of one network together with its layer shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterStore {
    values: Vec<f64>,
    shapes: Vec<LayerShape>,
}

pub(crate) fn total_len(shapes: &[LayerShape]) -> usize {
    shapes.iter().map(LayerShape::len).sum()
}

impl ParameterStore {
    pub fn new(shapes: Vec<LayerShape>, values: Vec<f64>) -> Result<Self> {
        let expected = total_len(&shapes);
        if values.len() != expected {
            return Err(Error::shape("parameter store", expected, values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "values",
                format!("parameter {i} is not finite"),
            ));
        }
        Ok(Self { values, shapes })
    }

    pub fn zeros(shapes: Vec<LayerShape>) -> Self {
        let n = total_len(&shapes);
        Self {
            values: vec![0.0; n],
            shapes,
        }
    }

    /// Fan-in scaled uniform weights, `U(-√(3/fan_in), √(3/fan_in))`, zero biases.
    pub fn init_uniform_fan_in<R: Rng + ?Sized>(shapes: Vec<LayerShape>, rng: &mut R) -> Self {
        let mut store = Self::zeros(shapes);
        let mut offset = 0;
        for shape in store.shapes.clone() {
            let bound = (3.0 / shape.cols.max(1) as f64).sqrt();
            for w in &mut store.values[offset..offset + shape.rows * shape.cols] {
                *w = rng.gen_range(-bound..=bound);
            }
            offset += shape.len();
        }
        store
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_layout(&self, other: &ParameterStore) -> bool {
        self.shapes == other.shapes
    }

    /// Offset of layer `index` inside the flat vector.
    pub fn layer_offset(&self, index: usize) -> usize {
        total_len(&self.shapes[..index])
    }

    /// Mutable weight and bias views of layer `index`.
    pub fn layer_mut(&mut self, index: usize) -> (&mut [f64], &mut [f64]) {
        let offset = self.layer_offset(index);
        let shape = self.shapes[index];
        let block = &mut self.values[offset..offset + shape.len()];
        block.split_at_mut(shape.rows * shape.cols)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_wrong_length_and_non_finite() {
        let shapes = vec![LayerShape::new(2, 3)];
        assert!(ParameterStore::new(shapes.clone(), vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[4] = f64::NAN;
        assert!(ParameterStore::new(shapes.clone(), v).is_err());
        assert!(ParameterStore::new(shapes, vec![0.0; 8]).is_ok());
    }

    #[test]
    fn init_leaves_biases_zero_and_bounds_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shapes = vec![LayerShape::new(4, 12), LayerShape::new(1, 4)];
        let mut p = ParameterStore::init_uniform_fan_in(shapes, &mut rng);
        let (w, b) = p.layer_mut(0);
        assert!(w.iter().all(|v| v.abs() <= 0.5));
        assert!(b.iter().all(|&v| v == 0.0));
        let (_, b) = p.layer_mut(1);
        assert!(b.iter().all(|&v| v == 0.0));
        assert_eq!(p.layer_offset(1), 52);
    }
}
