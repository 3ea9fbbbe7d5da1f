//! Fully-connected layer.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<S> {
    /// `[out, in]`
    pub weight: Tensor<S>,
    /// `[out]`
    pub bias: Tensor<S>,
}

impl<S: Scalar> Linear<S> {
    pub fn new(weight: Tensor<S>, bias: Tensor<S>) -> Result<Self> {
        if weight.rank() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::ShapeMismatch(format!(
                "linear weight {:?} / bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Linear { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    /// `y = W x + b` on a length-`in` vector.
    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        if x.shape() != [self.in_dim()] {
            return Err(Error::ShapeMismatch(format!(
                "linear expects [{}], got {:?}",
                self.in_dim(),
                x.shape()
            )));
        }
        let mut out = Tensor::zeros(&[self.out_dim()]);
        matvec(
            self.weight.data(),
            self.bias.data(),
            x.data(),
            self.out_dim(),
            self.in_dim(),
            out.data_mut(),
        );
        Ok(out)
    }

    /// Applies the layer to every row of `[n, in]`, yielding `[n, out]`.
    pub fn forward_rows(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        if x.rank() != 2 || x.shape()[1] != self.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "linear rows expect [n, {}], got {:?}",
                self.in_dim(),
                x.shape()
            )));
        }
        let n = x.shape()[0];
        let mut out = Tensor::zeros(&[n, self.out_dim()]);
        for r in 0..n {
            matvec(
                self.weight.data(),
                self.bias.data(),
                &x.data()[r * self.in_dim()..(r + 1) * self.in_dim()],
                self.out_dim(),
                self.in_dim(),
                &mut out.data_mut()[r * self.out_dim()..(r + 1) * self.out_dim()],
            );
        }
        Ok(out)
    }

    /// Returns `(grad_x, grad_w, grad_b)` for a single vector input.
    pub fn backward(
        &self,
        x: &Tensor<S>,
        grad_out: &Tensor<S>,
    ) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
        if grad_out.shape() != [self.out_dim()] {
            return Err(Error::ShapeMismatch(format!(
                "linear grad_out {:?}, expected [{}]",
                grad_out.shape(),
                self.out_dim()
            )));
        }
        let mut grad_x = Tensor::zeros(x.shape());
        let mut grad_w = Tensor::zeros(self.weight.shape());
        let grad_b = grad_out.clone();
        accumulate_vec_grads(
            self.weight.data(),
            x.data(),
            grad_out.data(),
            self.out_dim(),
            self.in_dim(),
            grad_x.data_mut(),
            grad_w.data_mut(),
        );
        Ok((grad_x, grad_w, grad_b))
    }

    /// Row-wise backward matching [`Linear::forward_rows`].
    pub fn backward_rows(
        &self,
        x: &Tensor<S>,
        grad_out: &Tensor<S>,
    ) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
        let n = x.shape()[0];
        if grad_out.shape() != [n, self.out_dim()] {
            return Err(Error::ShapeMismatch(format!(
                "linear rows grad_out {:?}, expected {:?}",
                grad_out.shape(),
                [n, self.out_dim()]
            )));
        }
        let mut grad_x = Tensor::zeros(x.shape());
        let mut grad_w = Tensor::zeros(self.weight.shape());
        let mut grad_b = Tensor::zeros(self.bias.shape());
        for r in 0..n {
            let go = &grad_out.data()[r * self.out_dim()..(r + 1) * self.out_dim()];
            accumulate_vec_grads(
                self.weight.data(),
                &x.data()[r * self.in_dim()..(r + 1) * self.in_dim()],
                go,
                self.out_dim(),
                self.in_dim(),
                &mut grad_x.data_mut()[r * self.in_dim()..(r + 1) * self.in_dim()],
                grad_w.data_mut(),
            );
            for (gb, g) in grad_b.data_mut().iter_mut().zip(go) {
                *gb += *g;
            }
        }
        Ok((grad_x, grad_w, grad_b))
    }
}

fn matvec<S: Scalar>(w: &[S], b: &[S], x: &[S], out_dim: usize, in_dim: usize, out: &mut [S]) {
    for o in 0..out_dim {
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let mut acc = b[o];
        for (wv, xv) in row.iter().zip(x) {
            acc += *wv * *xv;
        }
        out[o] = acc;
    }
}

fn accumulate_vec_grads<S: Scalar>(
    w: &[S],
    x: &[S],
    grad_out: &[S],
    out_dim: usize,
    in_dim: usize,
    grad_x: &mut [S],
    grad_w: &mut [S],
) {
    for o in 0..out_dim {
        let g = grad_out[o];
        if g == S::zero() {
            continue;
        }
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let wrow = &mut grad_w[o * in_dim..(o + 1) * in_dim];
        for i in 0..in_dim {
            grad_x[i] += g * row[i];
            wrow[i] += g * x[i];
        }
    }
}
