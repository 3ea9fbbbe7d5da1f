//! Elementwise nonlinearities and the softmax map.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn relu<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(|v| if v > S::zero() { v } else { S::zero() })
}

/// Gradient uses the input: zero where `x <= 0` (subgradient 0 at the kink).
pub fn relu_backward<S: Scalar>(x: &Tensor<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
    x.zip_map(grad_out, |v, g| if v > S::zero() { g } else { S::zero() })
}

pub fn sigmoid<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(sigmoid_scalar)
}

#[inline]
pub fn sigmoid_scalar<S: Scalar>(v: S) -> S {
    // Split on sign so exp never overflows.
    if v >= S::zero() {
        S::one() / (S::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (S::one() + e)
    }
}

/// Gradient in terms of the cached output `y`: `g * y * (1 - y)`.
pub fn sigmoid_backward<S: Scalar>(y: &Tensor<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
    y.zip_map(grad_out, |yv, g| g * yv * (S::one() - yv))
}

/// Numerically stable softmax of a length-K vector: the max is subtracted
/// before exponentiation, outputs are positive and sum to 1.
pub fn softmax<S: Scalar>(logits: &Tensor<S>) -> Result<Tensor<S>> {
    if logits.rank() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "softmax expects rank 1, got {:?}",
            logits.shape()
        )));
    }
    let mut out = logits.clone();
    softmax_slice(out.data_mut());
    Ok(out)
}

/// Softmax applied independently to each row of `[n, K]`.
pub fn softmax_rows<S: Scalar>(logits: &Tensor<S>) -> Result<Tensor<S>> {
    if logits.rank() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "softmax rows expect rank 2, got {:?}",
            logits.shape()
        )));
    }
    let k = logits.shape()[1];
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(k) {
        softmax_slice(row);
    }
    Ok(out)
}

pub fn softmax_slice<S: Scalar>(v: &mut [S]) {
    let mut m = S::neg_infinity();
    for x in v.iter() {
        if *x > m {
            m = *x;
        }
    }
    let mut sum = S::zero();
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Pulls a gradient on softmax outputs back to the logits:
/// `gz_i = y_i * (gy_i - sum_j gy_j * y_j)`.
pub fn softmax_backward_slice<S: Scalar>(y: &[S], grad_y: &[S], grad_z: &mut [S]) {
    let mut dot = S::zero();
    for (yv, g) in y.iter().zip(grad_y) {
        dot += *yv * *g;
    }
    for i in 0..y.len() {
        grad_z[i] = y[i] * (grad_y[i] - dot);
    }
}

pub fn softmax_backward<S: Scalar>(y: &Tensor<S>, grad_y: &Tensor<S>) -> Result<Tensor<S>> {
    if y.shape() != grad_y.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            y.shape(),
            grad_y.shape()
        )));
    }
    let mut out = Tensor::zeros(y.shape());
    softmax_backward_slice(y.data(), grad_y.data(), out.data_mut());
    Ok(out)
}

/// Row-wise softmax backward for `[n, K]` activations.
pub fn softmax_rows_backward<S: Scalar>(y: &Tensor<S>, grad_y: &Tensor<S>) -> Result<Tensor<S>> {
    if y.shape() != grad_y.shape() || y.rank() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            y.shape(),
            grad_y.shape()
        )));
    }
    let k = y.shape()[1];
    let mut out = Tensor::zeros(y.shape());
    for ((yr, gr), or) in y
        .data()
        .chunks(k)
        .zip(grad_y.data().chunks(k))
        .zip(out.data_mut().chunks_mut(k))
    {
        softmax_backward_slice(yr, gr, or);
    }
    Ok(out)
}
