//! Floating-point scalar abstraction.
//!
//! Core math is written once against this trait so the same kernels run in
//! `f32` or `f64`. The pipeline defaults to `f64`: gradient-check tolerances
//! dominate at desk scale, speed does not.

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::distributions::uniform::SampleUniform;

pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + SampleUniform
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Shorthand for lossy conversion from `f64` constants.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
