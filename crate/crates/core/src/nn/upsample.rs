//! Nearest-neighbor 2x upsampling.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `[c, h, w]` -> `[c, 2h, 2w]`, each cell duplicated into a 2x2 block.
pub fn upsample2x_forward<S: Scalar>(x: &Tensor<S>) -> Result<Tensor<S>> {
    if x.rank() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "upsample expects rank 3, got {:?}",
            x.shape()
        )));
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut out = Tensor::zeros(&[c, 2 * h, 2 * w]);
    let xd = x.data();
    let od = out.data_mut();
    for ci in 0..c {
        for iy in 0..h {
            for ix in 0..w {
                let v = xd[(ci * h + iy) * w + ix];
                let base = (ci * 2 * h + 2 * iy) * 2 * w + 2 * ix;
                od[base] = v;
                od[base + 1] = v;
                od[base + 2 * w] = v;
                od[base + 2 * w + 1] = v;
            }
        }
    }
    Ok(out)
}

/// Each input cell collects the gradient of its 2x2 output block.
pub fn upsample2x_backward<S: Scalar>(
    in_shape: &[usize],
    grad_out: &Tensor<S>,
) -> Result<Tensor<S>> {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    if grad_out.shape() != [c, 2 * h, 2 * w] {
        return Err(Error::ShapeMismatch(format!(
            "upsample grad_out {:?}, expected {:?}",
            grad_out.shape(),
            [c, 2 * h, 2 * w]
        )));
    }
    let mut grad_in = Tensor::zeros(in_shape);
    let gd = grad_out.data();
    let gid = grad_in.data_mut();
    for ci in 0..c {
        for iy in 0..h {
            for ix in 0..w {
                let base = (ci * 2 * h + 2 * iy) * 2 * w + 2 * ix;
                gid[(ci * h + iy) * w + ix] =
                    gd[base] + gd[base + 1] + gd[base + 2 * w] + gd[base + 2 * w + 1];
            }
        }
    }
    Ok(grad_in)
}
