use rand::Rng;

use super::Scalar;

/// Inverted-dropout keep mask: each entry is `0` or `1/(1-rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<T> {
    pub scale: Vec<T>,
}

impl<T: Scalar> DropoutMask<T> {
    pub fn sample<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Self {
        let keep = T::of(1.0 / (1.0 - rate));
        let scale = (0..n)
            .map(|_| {
                if rate > 0.0 && rng.random::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        DropoutMask { scale }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(&self.scale).map(|(&a, &m)| a * m).collect()
    }

    /// Backward pass is the same elementwise product.
    pub fn apply_in_place(&self, x: &mut [T]) {
        for (a, &m) in x.iter_mut().zip(&self.scale) {
            *a *= m;
        }
    }
}

/// Zeroes each unit with probability `rate` and rescales survivors by
/// `1/(1-rate)` when `training`; identity otherwise.
pub fn dropout_apply<T: Scalar, R: Rng + ?Sized>(
    x: &[T],
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Vec<T> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if !training || rate == 0.0 {
        return x.to_vec();
    }
    DropoutMask::sample(x.len(), rate, rng).apply(x)
}
