use crate::error::{Error, Result};

use super::Scalar;

/// Dense row-major array with an explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn row(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: T) {
        for a in &mut self.data {
            *a *= factor;
        }
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|a| *a = value);
    }

    /// `out = self · x` for a 2-D tensor.
    pub fn matvec(&self, x: &[T], out: &mut [T]) {
        let c = self.cols();
        debug_assert_eq!(x.len(), c);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(c)) {
            *o = dot(row, x);
        }
    }

    /// `out += selfᵀ · y` for a 2-D tensor.
    pub fn matvec_t_acc(&self, y: &[T], out: &mut [T]) {
        let c = self.cols();
        for (&yi, row) in y.iter().zip(self.data.chunks_exact(c)) {
            if yi == T::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(row) {
                *o += yi * w;
            }
        }
    }

    /// `self += y · xᵀ` (outer-product accumulation) for a 2-D tensor.
    pub fn outer_acc(&mut self, y: &[T], x: &[T]) {
        let c = self.cols();
        for (&yi, row) in y.iter().zip(self.data.chunks_exact_mut(c)) {
            if yi == T::zero() {
                continue;
            }
            for (w, &xj) in row.iter_mut().zip(x) {
                *w += yi * xj;
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| U::of(x.f64())).collect(),
        }
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}
