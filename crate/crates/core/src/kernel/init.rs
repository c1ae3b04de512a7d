use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Scalar, Tensor};

/// Fills with `N(0, sigma²)`; samples are drawn in `f64` so that `f32` and
/// `f64` models built from the same seed agree up to rounding.
pub fn fill_normal<T: Scalar, R: Rng + ?Sized>(t: &mut Tensor<T>, sigma: f64, rng: &mut R) {
    let dist = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    for x in t.data_mut() {
        *x = T::of(dist.sample(rng));
    }
}

/// Glorot/Xavier uniform over `±√(6 / (fan_in + fan_out))` for a
/// `[fan_out, fan_in]` matrix.
pub fn fill_glorot_uniform<T: Scalar, R: Rng + ?Sized>(t: &mut Tensor<T>, rng: &mut R) {
    let bound = glorot_bound(t.cols(), t.rows());
    for x in t.data_mut() {
        *x = T::of(rng.random_range(-bound..=bound));
    }
}

pub(crate) fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
