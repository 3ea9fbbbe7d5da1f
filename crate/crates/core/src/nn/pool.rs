//! Max pooling with ceil semantics: a partial window at the right/bottom edge
//! pools whatever cells exist, so odd extents round up instead of dropping
//! pixels.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool2d {
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
}

impl MaxPool2d {
    pub fn new(kh: usize, kw: usize, sh: usize, sw: usize) -> Self {
        assert!(kh >= 1 && kw >= 1 && sh >= 1 && sw >= 1);
        MaxPool2d { kh, kw, sh, sw }
    }

    pub fn square(k: usize) -> Self {
        MaxPool2d::new(k, k, k, k)
    }

    fn out_extent(input: usize, kernel: usize, stride: usize) -> usize {
        if input <= kernel {
            1
        } else {
            (input - kernel + stride - 1) / stride + 1
        }
    }

    pub fn out_shape(&self, shape: &[usize]) -> [usize; 3] {
        [
            shape[0],
            Self::out_extent(shape[1], self.kh, self.sh),
            Self::out_extent(shape[2], self.kw, self.sw),
        ]
    }

    /// Returns the pooled tensor and, per output cell, the flat input index of
    /// the chosen maximum (first maximal cell in row-major order on ties).
    pub fn forward<S: Scalar>(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Vec<usize>)> {
        if x.rank() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "pool expects rank 3, got {:?}",
                x.shape()
            )));
        }
        let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let [_, oh, ow] = self.out_shape(x.shape());
        let mut out = Tensor::zeros(&[c, oh, ow]);
        let mut argmax = vec![0usize; c * oh * ow];
        let xd = x.data();
        let od = out.data_mut();
        for ci in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let y0 = oy * self.sh;
                    let x0 = ox * self.sw;
                    let mut best = S::neg_infinity();
                    let mut best_idx = 0usize;
                    for ky in 0..self.kh {
                        let iy = y0 + ky;
                        if iy >= h {
                            break;
                        }
                        for kx in 0..self.kw {
                            let ix = x0 + kx;
                            if ix >= w {
                                break;
                            }
                            let idx = (ci * h + iy) * w + ix;
                            if xd[idx] > best {
                                best = xd[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = (ci * oh + oy) * ow + ox;
                    od[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
        Ok((out, argmax))
    }

    /// Routes each output gradient to the input cell that won the max.
    pub fn backward<S: Scalar>(
        &self,
        in_shape: &[usize],
        argmax: &[usize],
        grad_out: &Tensor<S>,
    ) -> Result<Tensor<S>> {
        if grad_out.len() != argmax.len() {
            return Err(Error::ShapeMismatch(
                "pool grad_out does not match cached argmax".into(),
            ));
        }
        let mut grad_in = Tensor::zeros(in_shape);
        let gid = grad_in.data_mut();
        for (g, &idx) in grad_out.data().iter().zip(argmax) {
            gid[idx] += *g;
        }
        Ok(grad_in)
    }
}
