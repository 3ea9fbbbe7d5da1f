//! Plain stochastic gradient descent.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `w <- w - lr * g`, returning the updated tensor. `lr = 0` is a no-op.
pub fn sgd_update<S: Scalar>(param: &Tensor<S>, grad: &Tensor<S>, lr: S) -> Result<Tensor<S>> {
    if lr < S::zero() {
        return Err(Error::InvalidInput(format!(
            "learning rate must be >= 0, got {lr}"
        )));
    }
    param.zip_map(grad, |w, g| w - lr * g)
}

/// In-place variant used by the training loops.
pub fn sgd_step_in_place<S: Scalar>(param: &mut Tensor<S>, grad: &Tensor<S>, lr: S) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(Error::ShapeMismatch(format!(
            "sgd: param {:?} vs grad {:?}",
            param.shape(),
            grad.shape()
        )));
    }
    for (w, g) in param.data_mut().iter_mut().zip(grad.data()) {
        *w = *w - lr * *g;
    }
    Ok(())
}

/// Scales all gradients by `max_norm / norm` when their joint L2 norm exceeds
/// `max_norm`. Returns the pre-clip norm.
pub fn clip_global_norm<S: Scalar>(grads: &mut [&mut Tensor<S>], max_norm: S) -> S {
    let mut sq = S::zero();
    for g in grads.iter() {
        for v in g.data() {
            sq += *v * *v;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > S::zero() {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lr_is_identity() {
        let w = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let g = Tensor::new(vec![3], vec![10.0, 10.0, 10.0]).unwrap();
        assert_eq!(sgd_update(&w, &g, 0.0).unwrap(), w);
    }

    #[test]
    fn basic_arithmetic() {
        let w = Tensor::<f64>::new(vec![1], vec![1.0]).unwrap();
        let g = Tensor::new(vec![1], vec![0.5]).unwrap();
        let w2 = sgd_update(&w, &g, 0.1).unwrap();
        assert!((w2.data()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_lr_and_shape_mismatch() {
        let w = Tensor::<f64>::new(vec![1], vec![1.0]).unwrap();
        let g = Tensor::new(vec![2], vec![0.5, 0.5]).unwrap();
        assert!(sgd_update(&w, &w.clone(), -0.1).is_err());
        assert!(sgd_update(&w, &g, 0.1).is_err());
    }

    #[test]
    fn contracts_quadratic_loss() {
        // loss = w^2/2, grad = w; |w| must shrink every step at lr = 0.1.
        let mut w = Tensor::<f64>::new(vec![1], vec![3.0]).unwrap();
        let mut prev = w.data()[0].abs();
        for _ in 0..50 {
            let g = w.clone();
            w = sgd_update(&w, &g, 0.1).unwrap();
            let cur = w.data()[0].abs();
            assert!(cur < prev);
            prev = cur;
        }
    }
}
