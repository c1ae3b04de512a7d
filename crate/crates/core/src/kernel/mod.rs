//! Minimal numeric substrate: tensors, dense and LSTM layers with exact
//! backward passes, softmax cross-entropy, dropout, Adagrad, initializers.
//!
//! Everything is generic over [`Scalar`] so models train in `f32` while
//! gradient checks run the same code in `f64`.

mod adagrad;
mod dense;
mod dropout;
mod init;
mod lstm;
mod scalar;
mod tensor;

pub use adagrad::{adagrad_update, Adagrad, ADAGRAD_EPSILON};
pub use dense::{cross_entropy, log_softmax, softmax, softmax_backward_ce, Dense};
pub use dropout::{dropout_apply, DropoutMask};
pub use init::{fill_glorot_uniform, fill_normal};
pub use lstm::{LstmCache, LstmGradStep, LstmParams, LstmState};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// A bag of named tensors visited in a fixed order. Models implement this
/// so that optimizers, checkpoints and gradient checks can treat every
/// parameter uniformly.
pub trait Parameters<T: Scalar> {
    fn tensors(&self) -> Vec<(&str, &Tensor<T>)>;
    fn tensors_mut(&mut self) -> Vec<(&str, &mut Tensor<T>)>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

/// `dst += src` over matching parameter bags.
pub fn accumulate<T: Scalar, P: Parameters<T>>(dst: &mut P, src: &P) {
    for ((_, d), (_, s)) in dst.tensors_mut().into_iter().zip(src.tensors()) {
        d.add_assign(s);
    }
}

/// `p *= factor` for every tensor.
pub fn scale<T: Scalar, P: Parameters<T>>(p: &mut P, factor: T) {
    for (_, t) in p.tensors_mut() {
        t.scale(factor);
    }
}

/// Fails on the first NaN/Inf entry.
pub fn check_finite<T: Scalar, P: Parameters<T>>(p: &P, what: &str) -> crate::Result<()> {
    for (name, t) in p.tensors() {
        if let Some(i) = t.data().iter().position(|x| !x.is_finite()) {
            return Err(crate::Error::Numeric(format!(
                "non-finite {what} in `{name}` at flat index {i}"
            )));
        }
    }
    Ok(())
}
