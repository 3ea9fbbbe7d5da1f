//! LSTM cell with explicit backward pass.
//!
//! Gate layout in the stacked parameter matrices is `[i, f, g, o]` chunks of
//! the hidden width: input gate, forget gate, candidate, output gate.

use crate::error::{Error, Result};
use crate::nn::activations::sigmoid_scalar;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell<S> {
    /// `[4H, D]`
    pub w_ih: Tensor<S>,
    /// `[4H, H]`
    pub w_hh: Tensor<S>,
    /// `[4H]`
    pub bias: Tensor<S>,
}

/// Forward state needed to run the step backward.
#[derive(Debug, Clone)]
pub struct LstmStepCache<S> {
    pub x: Tensor<S>,
    pub h_prev: Tensor<S>,
    pub c_prev: Tensor<S>,
    i: Vec<S>,
    f: Vec<S>,
    g: Vec<S>,
    o: Vec<S>,
    c: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct LstmGrads<S> {
    pub w_ih: Tensor<S>,
    pub w_hh: Tensor<S>,
    pub bias: Tensor<S>,
}

impl<S: Scalar> LstmGrads<S> {
    pub fn zeros_like(cell: &LstmCell<S>) -> Self {
        LstmGrads {
            w_ih: Tensor::zeros(cell.w_ih.shape()),
            w_hh: Tensor::zeros(cell.w_hh.shape()),
            bias: Tensor::zeros(cell.bias.shape()),
        }
    }
}

impl<S: Scalar> LstmCell<S> {
    pub fn new(w_ih: Tensor<S>, w_hh: Tensor<S>, bias: Tensor<S>) -> Result<Self> {
        if w_ih.rank() != 2 || w_hh.rank() != 2 {
            return Err(Error::ShapeMismatch("LSTM weights must be rank 2".into()));
        }
        let four_h = w_ih.shape()[0];
        if four_h % 4 != 0 || four_h == 0 {
            return Err(Error::ShapeMismatch(format!(
                "LSTM stacked gate rows must be 4*H, got {four_h}"
            )));
        }
        let h = four_h / 4;
        if w_hh.shape() != [four_h, h] || bias.shape() != [four_h] {
            return Err(Error::ShapeMismatch(format!(
                "LSTM w_hh {:?} / bias {:?} inconsistent with H={h}",
                w_hh.shape(),
                bias.shape()
            )));
        }
        Ok(LstmCell { w_ih, w_hh, bias })
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.shape()[1]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_ih.shape()[0] / 4
    }

    /// One cell step:
    /// `i,f,o = sigmoid(affine)`, `g = tanh(affine)`,
    /// `c = f*c_prev + i*g`, `h = o*tanh(c)`.
    pub fn step(
        &self,
        x: &Tensor<S>,
        h_prev: &Tensor<S>,
        c_prev: &Tensor<S>,
    ) -> Result<(Tensor<S>, Tensor<S>)> {
        let (h, c, _) = self.step_cached(x, h_prev, c_prev)?;
        Ok((h, c))
    }

    pub fn step_cached(
        &self,
        x: &Tensor<S>,
        h_prev: &Tensor<S>,
        c_prev: &Tensor<S>,
    ) -> Result<(Tensor<S>, Tensor<S>, LstmStepCache<S>)> {
        let d = self.input_dim();
        let hd = self.hidden_dim();
        if x.shape() != [d] || h_prev.shape() != [hd] || c_prev.shape() != [hd] {
            return Err(Error::ShapeMismatch(format!(
                "LSTM step expects x[{d}], h[{hd}], c[{hd}]; got {:?}, {:?}, {:?}",
                x.shape(),
                h_prev.shape(),
                c_prev.shape()
            )));
        }

        // a = W_ih x + W_hh h_prev + b
        let mut a = vec![S::zero(); 4 * hd];
        let wih = self.w_ih.data();
        let whh = self.w_hh.data();
        for r in 0..4 * hd {
            let mut acc = self.bias.data()[r];
            let row = &wih[r * d..(r + 1) * d];
            for (wv, xv) in row.iter().zip(x.data()) {
                acc += *wv * *xv;
            }
            let row = &whh[r * hd..(r + 1) * hd];
            for (wv, hv) in row.iter().zip(h_prev.data()) {
                acc += *wv * *hv;
            }
            a[r] = acc;
        }

        let mut i = vec![S::zero(); hd];
        let mut f = vec![S::zero(); hd];
        let mut g = vec![S::zero(); hd];
        let mut o = vec![S::zero(); hd];
        for k in 0..hd {
            i[k] = sigmoid_scalar(a[k]);
            f[k] = sigmoid_scalar(a[hd + k]);
            g[k] = a[2 * hd + k].tanh();
            o[k] = sigmoid_scalar(a[3 * hd + k]);
        }
        let mut c = vec![S::zero(); hd];
        let mut h = vec![S::zero(); hd];
        for k in 0..hd {
            c[k] = f[k] * c_prev.data()[k] + i[k] * g[k];
            h[k] = o[k] * c[k].tanh();
        }

        let cache = LstmStepCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            i,
            f,
            g,
            o,
            c: c.clone(),
        };
        Ok((
            Tensor::new(vec![hd], h)?,
            Tensor::new(vec![hd], c)?,
            cache,
        ))
    }

    /// Backward through one step. `grad_h`/`grad_c` are the gradients arriving
    /// at this step's outputs; parameter gradients accumulate into `grads`.
    /// Returns `(grad_x, grad_h_prev, grad_c_prev)`.
    pub fn step_backward(
        &self,
        cache: &LstmStepCache<S>,
        grad_h: &Tensor<S>,
        grad_c: &Tensor<S>,
        grads: &mut LstmGrads<S>,
    ) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
        let d = self.input_dim();
        let hd = self.hidden_dim();
        if grad_h.shape() != [hd] || grad_c.shape() != [hd] {
            return Err(Error::ShapeMismatch("LSTM grad shape".into()));
        }

        // d(pre-activation) for the stacked gates.
        let mut dpre = vec![S::zero(); 4 * hd];
        let one = S::one();
        for k in 0..hd {
            let tanh_c = cache.c[k].tanh();
            let dh = grad_h.data()[k];
            let dc = grad_c.data()[k] + dh * cache.o[k] * (one - tanh_c * tanh_c);
            let (i, f, g, o) = (cache.i[k], cache.f[k], cache.g[k], cache.o[k]);
            dpre[k] = dc * g * i * (one - i);
            dpre[hd + k] = dc * cache.c_prev.data()[k] * f * (one - f);
            dpre[2 * hd + k] = dc * i * (one - g * g);
            dpre[3 * hd + k] = dh * tanh_c * o * (one - o);
        }

        let mut grad_x = Tensor::zeros(&[d]);
        let mut grad_h_prev = Tensor::zeros(&[hd]);
        let mut grad_c_prev = Tensor::zeros(&[hd]);
        for k in 0..hd {
            let tanh_c = cache.c[k].tanh();
            let dc = grad_c.data()[k] + grad_h.data()[k] * cache.o[k] * (one - tanh_c * tanh_c);
            grad_c_prev.data_mut()[k] = dc * cache.f[k];
        }

        let wih = self.w_ih.data();
        let whh = self.w_hh.data();
        for r in 0..4 * hd {
            let dp = dpre[r];
            if dp == S::zero() {
                continue;
            }
            grads.bias.data_mut()[r] += dp;
            let wrow = &wih[r * d..(r + 1) * d];
            let growx = &mut grads.w_ih.data_mut()[r * d..(r + 1) * d];
            for idx in 0..d {
                grad_x.data_mut()[idx] += dp * wrow[idx];
                growx[idx] += dp * cache.x.data()[idx];
            }
            let wrow = &whh[r * hd..(r + 1) * hd];
            let growh = &mut grads.w_hh.data_mut()[r * hd..(r + 1) * hd];
            for idx in 0..hd {
                grad_h_prev.data_mut()[idx] += dp * wrow[idx];
                growh[idx] += dp * cache.h_prev.data()[idx];
            }
        }

        Ok((grad_x, grad_h_prev, grad_c_prev))
    }
}
