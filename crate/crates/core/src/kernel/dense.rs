use rand::Rng;

use crate::error::{Error, Result};

use super::{fill_glorot_uniform, Scalar, Tensor};

/// Fully-connected layer `y = W x + b` with `W` of shape `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub w: Tensor<T>,
    pub b: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            w: Tensor::zeros(&[output, input]),
            b: Tensor::zeros(&[output]),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let mut d = Self::zeros(input, output);
        fill_glorot_uniform(&mut d.w, rng);
        d
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn num_params(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn zeros_like(&self) -> Self {
        Dense {
            w: self.w.zeros_like(),
            b: self.b.zeros_like(),
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "dense layer expects input of length {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let mut y = vec![T::zero(); self.output_dim()];
        self.forward_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn forward_into(&self, x: &[T], y: &mut [T]) {
        self.w.matvec(x, y);
        for (yi, &bi) in y.iter_mut().zip(self.b.data()) {
            *yi += bi;
        }
    }

    /// Accumulates parameter gradients into `grad` and adds `Wᵀ dy` to `dx`.
    pub fn backward(&self, x: &[T], dy: &[T], grad: &mut Dense<T>, dx: Option<&mut [T]>) {
        grad.w.outer_acc(dy, x);
        for (g, &d) in grad.b.data_mut().iter_mut().zip(dy) {
            *g += d;
        }
        if let Some(dx) = dx {
            self.w.matvec_t_acc(dy, dx);
        }
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut p: Vec<T> = z.iter().map(|&x| (x - m).exp()).collect();
    let s: T = p.iter().copied().sum();
    for x in &mut p {
        *x = *x / s;
    }
    p
}

pub fn log_softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + z.iter().map(|&x| (x - m).exp()).sum::<T>().ln();
    z.iter().map(|&x| x - lse).collect()
}

/// `-ln p[target]`.
pub fn cross_entropy<T: Scalar>(p: &[T], target: usize) -> T {
    -p[target].ln()
}

/// Gradient of `cross_entropy(softmax(z), target)` with respect to `z`,
/// scaled by `weight`: `weight · (p − onehot(target))`.
pub fn softmax_backward_ce<T: Scalar>(p: &[T], target: usize, weight: T) -> Vec<T> {
    let mut dz: Vec<T> = p.iter().map(|&x| x * weight).collect();
    dz[target] -= weight;
    dz
}
