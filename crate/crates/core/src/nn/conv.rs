//! 2-D convolution (cross-correlation convention, no kernel flip).

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<S> {
    /// `[c_out, c_in, kh, kw]`
    pub weight: Tensor<S>,
    /// `[c_out]`
    pub bias: Tensor<S>,
    pub stride: usize,
    pub pad: usize,
}

impl<S: Scalar> Conv2d<S> {
    pub fn new(weight: Tensor<S>, bias: Tensor<S>, stride: usize, pad: usize) -> Result<Self> {
        if weight.rank() != 4 {
            return Err(Error::ShapeMismatch(format!(
                "conv weight must be rank 4, got {:?}",
                weight.shape()
            )));
        }
        if bias.shape() != [weight.shape()[0]] {
            return Err(Error::ShapeMismatch(format!(
                "conv bias {:?} does not match {} output channels",
                bias.shape(),
                weight.shape()[0]
            )));
        }
        if stride < 1 {
            return Err(Error::InvalidInput("conv stride must be >= 1".into()));
        }
        Ok(Conv2d {
            weight,
            bias,
            stride,
            pad,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weight.shape()[2], self.weight.shape()[3])
    }

    fn out_extent(&self, input: usize, kernel: usize) -> Result<usize> {
        let padded = input + 2 * self.pad;
        if padded < kernel {
            return Err(Error::ShapeMismatch(format!(
                "kernel {kernel} does not fit padded extent {padded}"
            )));
        }
        Ok((padded - kernel) / self.stride + 1)
    }

    /// `[c_in, h, w]` -> `[c_out, h', w']` with
    /// `h' = (h + 2*pad - kh) / stride + 1`. Out-of-image taps read as zero.
    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        if x.rank() != 3 || x.shape()[0] != self.in_channels() {
            return Err(Error::ShapeMismatch(format!(
                "conv expects [{}, h, w], got {:?}",
                self.in_channels(),
                x.shape()
            )));
        }
        let (c_in, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (kh, kw) = self.kernel();
        let c_out = self.out_channels();
        let out_h = self.out_extent(h, kh)?;
        let out_w = self.out_extent(w, kw)?;

        let mut out = Tensor::zeros(&[c_out, out_h, out_w]);
        let xd = x.data();
        let wd = self.weight.data();
        let od = out.data_mut();
        for co in 0..c_out {
            let b = self.bias.data()[co];
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let mut acc = b;
                    for ci in 0..c_in {
                        for ky in 0..kh {
                            let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                            if iy < 0 || iy as usize >= h {
                                continue;
                            }
                            let xrow = (ci * h + iy as usize) * w;
                            let wrow = ((co * c_in + ci) * kh + ky) * kw;
                            for kx in 0..kw {
                                let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                                if ix < 0 || ix as usize >= w {
                                    continue;
                                }
                                acc += wd[wrow + kx] * xd[xrow + ix as usize];
                            }
                        }
                    }
                    od[(co * out_h + oy) * out_w + ox] = acc;
                }
            }
        }
        Ok(out)
    }

    /// Gradients of the forward map w.r.t. input, weight and bias.
    pub fn backward(
        &self,
        x: &Tensor<S>,
        grad_out: &Tensor<S>,
    ) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
        let (c_in, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (kh, kw) = self.kernel();
        let c_out = self.out_channels();
        let out_h = self.out_extent(h, kh)?;
        let out_w = self.out_extent(w, kw)?;
        if grad_out.shape() != [c_out, out_h, out_w] {
            return Err(Error::ShapeMismatch(format!(
                "grad_out {:?}, expected {:?}",
                grad_out.shape(),
                [c_out, out_h, out_w]
            )));
        }

        let mut grad_x = Tensor::zeros(x.shape());
        let mut grad_w = Tensor::zeros(self.weight.shape());
        let mut grad_b = Tensor::zeros(self.bias.shape());
        let xd = x.data();
        let wd = self.weight.data();
        let gd = grad_out.data();
        let gxd = grad_x.data_mut();
        let gwd = grad_w.data_mut();
        let gbd = grad_b.data_mut();
        for co in 0..c_out {
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let g = gd[(co * out_h + oy) * out_w + ox];
                    if g == S::zero() {
                        continue;
                    }
                    gbd[co] += g;
                    for ci in 0..c_in {
                        for ky in 0..kh {
                            let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                            if iy < 0 || iy as usize >= h {
                                continue;
                            }
                            let xrow = (ci * h + iy as usize) * w;
                            let wrow = ((co * c_in + ci) * kh + ky) * kw;
                            for kx in 0..kw {
                                let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                                if ix < 0 || ix as usize >= w {
                                    continue;
                                }
                                gxd[xrow + ix as usize] += g * wd[wrow + kx];
                                gwd[wrow + kx] += g * xd[xrow + ix as usize];
                            }
                        }
                    }
                }
            }
        }
        Ok((grad_x, grad_w, grad_b))
    }
}
