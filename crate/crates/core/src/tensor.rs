//! Dense row-major tensors.

use std::fmt;

use crate::scalar::Real;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TensorError {
    #[error("shape {shape:?} holds {expected} values, got {actual}")]
    Length {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("shape {0:?} has a zero extent")]
    ZeroExtent(Vec<usize>),
}

/// Dense tensor stored as a flat row-major buffer.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, values: Vec<T>) -> Result<Self, TensorError> {
        if shape.contains(&0) {
            return Err(TensorError::ZeroExtent(shape));
        }
        let expected = shape.iter().product::<usize>();
        if expected != values.len() {
            return Err(TensorError::Length {
                shape,
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            values: vec![T::zero(); len],
        }
    }

    pub fn from_vec(values: Vec<T>) -> Self {
        Self {
            shape: vec![values.len().max(1)],
            values: if values.is_empty() { vec![T::zero()] } else { values },
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: vec![1],
            values: vec![value],
        }
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

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        crate::scalar::all_finite(&self.values)
    }

    pub fn fill(&mut self, value: T) {
        self.values.iter_mut().for_each(|v| *v = value);
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: T, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * *b;
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn squared_norm(&self) -> T {
        self.values.iter().map(|v| *v * *v).sum()
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| if v.abs() > acc { v.abs() } else { acc })
    }

    /// Lossless widening (or narrowing) into another scalar type.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.values.len() <= 8 {
            write!(f, "{:?}", self.values)
        } else {
            write!(f, "[{:?}, .. {} values]", &self.values[..4], self.values.len())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_length() {
        let err = Tensor::new(vec![2, 3], vec![0.0f64; 5]).unwrap_err();
        assert!(matches!(
            err,
            TensorError::Length {
                expected: 6,
                actual: 5,
                ..
            }
        ));
    }

    #[test]
    fn rejects_zero_extent() {
        assert!(Tensor::<f64>::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn axpy_and_norm() {
        let mut a = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(vec![2], vec![3.0, -1.0]).unwrap();
        a.axpy(2.0, &b);
        assert_eq!(a.values(), &[7.0, 0.0]);
        assert_eq!(a.squared_norm(), 49.0);
        assert_eq!(a.max_abs(), 7.0);
    }
}
