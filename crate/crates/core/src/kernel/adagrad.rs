use super::{Parameters, Scalar, Tensor};

pub const ADAGRAD_EPSILON: f64 = 1e-8;

/// One Adagrad step on a flat slice: `G += g²; p -= lr·g/(√G + ε)`.
pub fn adagrad_update<T: Scalar>(param: &mut [T], grad: &[T], accum: &mut [T], lr: f64) {
    let lr = T::of(lr);
    let eps = T::of(ADAGRAD_EPSILON);
    for ((p, &g), a) in param.iter_mut().zip(grad).zip(accum.iter_mut()) {
        if g == T::zero() {
            continue;
        }
        *a += g * g;
        *p -= lr * g / (a.sqrt() + eps);
    }
}

/// Adagrad state for a whole parameter bag.
#[derive(Debug, Clone, PartialEq)]
pub struct Adagrad<T> {
    pub lr: f64,
    accum: Vec<Tensor<T>>,
}

impl<T: Scalar> Adagrad<T> {
    pub fn new<P: Parameters<T>>(params: &P, lr: f64) -> Self {
        Adagrad {
            lr,
            accum: params.tensors().iter().map(|(_, t)| t.zeros_like()).collect(),
        }
    }

    pub fn step<P: Parameters<T>>(&mut self, params: &mut P, grads: &P) {
        for (((_, p), (_, g)), a) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.accum)
        {
            adagrad_update(p.data_mut(), g.data(), a.data_mut(), self.lr);
        }
    }

    pub fn accumulators(&self) -> &[Tensor<T>] {
        &self.accum
    }
}
