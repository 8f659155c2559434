use serde::{Deserialize, Serialize};

use crate::error::NnError;
use crate::real::Real;

/// Flat row-major tensor with an optional gradient buffer of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray<T> {
    shape: Vec<usize>,
    values: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Real> DenseArray<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        DenseArray {
            shape: shape.to_vec(),
            values: vec![T::zero(); len],
            grad: None,
        }
    }

    pub fn from_values(shape: &[usize], values: Vec<T>) -> Result<Self, NnError> {
        let len: usize = shape.iter().product();
        if len != values.len() {
            return Err(NnError::Shape(format!(
                "shape {shape:?} holds {len} values, got {}",
                values.len()
            )));
        }
        Ok(DenseArray {
            shape: shape.to_vec(),
            values,
            grad: None,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Gradient buffer, allocated as zeros on first use.
    pub fn grad_mut(&mut self) -> &mut [T] {
        let len = self.values.len();
        self.grad.get_or_insert_with(|| vec![T::zero(); len])
    }

    /// Values and the gradient buffer, borrowed together.
    pub fn split_mut(&mut self) -> (&[T], &mut [T]) {
        let len = self.values.len();
        let grad = self.grad.get_or_insert_with(|| vec![T::zero(); len]);
        (&self.values, grad)
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

/// Named parameters in registration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    arrays: Vec<DenseArray<T>>,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        ParamStore {
            names: Vec::new(),
            arrays: Vec::new(),
        }
    }
}

impl<T: Real> ParamStore<T> {
    pub fn register(&mut self, name: impl Into<String>, array: DenseArray<T>) -> ParamId {
        self.names.push(name.into());
        self.arrays.push(array);
        ParamId(self.arrays.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.arrays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrays.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &DenseArray<T> {
        &self.arrays[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut DenseArray<T> {
        &mut self.arrays[id.0]
    }

    pub(crate) fn values(&self, id: ParamId) -> &[T] {
        self.arrays[id.0].values()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseArray<T>)> {
        self.names.iter().map(String::as_str).zip(&self.arrays)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut DenseArray<T>)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.arrays.iter_mut())
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Total scalar count across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.arrays.iter().map(DenseArray::len).sum()
    }

    pub fn zero_grads(&mut self) {
        self.arrays.iter_mut().for_each(DenseArray::zero_grad);
    }
}
