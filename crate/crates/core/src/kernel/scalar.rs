use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type for tensors (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    const NAME: &'static str;

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("representable")
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}
