//! Parameter initialization.

use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::Rng;

/// Uniform in `[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<S: Scalar, R: Rng>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor<S> {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let lo = S::from_f64_lossy(-s);
    let hi = S::from_f64_lossy(s);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    Tensor::new(shape.to_vec(), data).expect("fresh shape")
}
