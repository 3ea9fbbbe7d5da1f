//! Differentiable layers with hand-written backward passes, an SGD optimizer,
//! a finite-difference gradient checker, and a binary model container.

pub mod activations;
pub mod conv;
pub mod gradcheck;
pub mod init;
pub mod linear;
pub mod lstm;
pub mod pool;
pub mod serialize;
pub mod sgd;
pub mod upsample;

pub use activations::{relu, sigmoid, softmax, softmax_rows};
pub use conv::Conv2d;
pub use gradcheck::{finite_diff_check, GradReport};
pub use init::xavier_uniform;
pub use linear::Linear;
pub use lstm::{LstmCell, LstmGrads, LstmStepCache};
pub use pool::MaxPool2d;
pub use serialize::ModelContainer;
pub use sgd::{clip_global_norm, sgd_step_in_place, sgd_update};
pub use upsample::{upsample2x_backward, upsample2x_forward};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// One stage of a sequential image-to-image network.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer<S> {
    Conv(Conv2d<S>),
    Relu,
    Sigmoid,
    MaxPool(MaxPool2d),
    Upsample2x,
}

impl<S: Scalar> Layer<S> {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::Relu => "relu",
            Layer::Sigmoid => "sigmoid",
            Layer::MaxPool(_) => "maxpool",
            Layer::Upsample2x => "upsample2x",
        }
    }
}

/// Forward state a [`Stack`] needs to run backward.
#[derive(Debug, Clone)]
pub enum LayerCache<S> {
    Conv { input: Tensor<S> },
    Relu { input: Tensor<S> },
    Sigmoid { output: Tensor<S> },
    MaxPool { argmax: Vec<usize>, in_shape: Vec<usize> },
    Upsample { in_shape: Vec<usize> },
}

/// Per-layer parameter gradients; `None` for parameterless layers.
#[derive(Debug, Clone)]
pub struct StackGrads<S> {
    pub per_layer: Vec<Option<(Tensor<S>, Tensor<S>)>>,
}

/// A plain sequential stack of [`Layer`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack<S> {
    pub layers: Vec<Layer<S>>,
}

impl<S: Scalar> Stack<S> {
    pub fn new(layers: Vec<Layer<S>>) -> Self {
        Stack { layers }
    }

    /// Forward pass. Activations are checked for NaN/Inf after every layer;
    /// the error names the offending layer.
    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let (out, _) = self.forward_cached(x)?;
        Ok(out)
    }

    pub fn forward_cached(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Vec<LayerCache<S>>)> {
        let mut cur = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let (next, cache) = match layer {
                Layer::Conv(c) => {
                    let out = c.forward(&cur)?;
                    (out, LayerCache::Conv { input: cur })
                }
                Layer::Relu => {
                    let out = activations::relu(&cur);
                    (out, LayerCache::Relu { input: cur })
                }
                Layer::Sigmoid => {
                    let out = activations::sigmoid(&cur);
                    (
                        out.clone(),
                        LayerCache::Sigmoid { output: out },
                    )
                }
                Layer::MaxPool(p) => {
                    let (out, argmax) = p.forward(&cur)?;
                    (
                        out,
                        LayerCache::MaxPool {
                            argmax,
                            in_shape: cur.shape().to_vec(),
                        },
                    )
                }
                Layer::Upsample2x => {
                    let out = upsample2x_forward(&cur)?;
                    (
                        out,
                        LayerCache::Upsample {
                            in_shape: cur.shape().to_vec(),
                        },
                    )
                }
            };
            if !next.all_finite() {
                return Err(Error::NonFinite {
                    location: format!("layer {i} ({})", layer.kind()),
                });
            }
            cur = next;
            caches.push(cache);
        }
        Ok((cur, caches))
    }

    /// Backward pass over cached forward state. Returns the input gradient
    /// and per-layer parameter gradients.
    pub fn backward(
        &self,
        caches: &[LayerCache<S>],
        grad_out: &Tensor<S>,
    ) -> Result<(Tensor<S>, StackGrads<S>)> {
        if caches.len() != self.layers.len() {
            return Err(Error::InvalidInput(format!(
                "cache holds {} layers, stack has {}",
                caches.len(),
                self.layers.len()
            )));
        }
        let mut grad = grad_out.clone();
        let mut per_layer = vec![None; self.layers.len()];
        for (i, layer) in self.layers.iter().enumerate().rev() {
            grad = match (layer, &caches[i]) {
                (Layer::Conv(c), LayerCache::Conv { input }) => {
                    let (gx, gw, gb) = c.backward(input, &grad)?;
                    per_layer[i] = Some((gw, gb));
                    gx
                }
                (Layer::Relu, LayerCache::Relu { input }) => {
                    activations::relu_backward(input, &grad)?
                }
                (Layer::Sigmoid, LayerCache::Sigmoid { output }) => {
                    activations::sigmoid_backward(output, &grad)?
                }
                (Layer::MaxPool(p), LayerCache::MaxPool { argmax, in_shape }) => {
                    p.backward(in_shape, argmax, &grad)?
                }
                (Layer::Upsample2x, LayerCache::Upsample { in_shape }) => {
                    upsample2x_backward(in_shape, &grad)?
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "cache at layer {i} does not match layer kind {}",
                        layer.kind()
                    )))
                }
            };
        }
        Ok((grad, StackGrads { per_layer }))
    }

    /// SGD step over every parameterized layer.
    pub fn apply_sgd(&mut self, grads: &StackGrads<S>, lr: S) -> Result<()> {
        if grads.per_layer.len() != self.layers.len() {
            return Err(Error::InvalidInput("gradient/layer count mismatch".into()));
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.per_layer) {
            if let (Layer::Conv(c), Some((gw, gb))) = (layer, g) {
                sgd::sgd_step_in_place(&mut c.weight, gw, lr)?;
                sgd::sgd_step_in_place(&mut c.bias, gb, lr)?;
            }
        }
        Ok(())
    }

    /// Accumulates `other`'s per-layer gradients into `acc`.
    pub fn accumulate_grads(acc: &mut StackGrads<S>, other: &StackGrads<S>) -> Result<()> {
        for (a, o) in acc.per_layer.iter_mut().zip(&other.per_layer) {
            match (a, o) {
                (Some((aw, ab)), Some((ow, ob))) => {
                    for (x, y) in aw.data_mut().iter_mut().zip(ow.data()) {
                        *x += *y;
                    }
                    for (x, y) in ab.data_mut().iter_mut().zip(ob.data()) {
                        *x += *y;
                    }
                }
                (None, None) => {}
                _ => return Err(Error::InvalidInput("gradient structure mismatch".into())),
            }
        }
        Ok(())
    }

    /// Named views of every parameter tensor, in layer order.
    pub fn named_params(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if let Layer::Conv(c) = layer {
                out.push((format!("layer{i}.weight"), &c.weight));
                out.push((format!("layer{i}.bias"), &c.bias));
            }
        }
        out
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Tensor<S>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            if let Layer::Conv(c) = layer {
                out.push((format!("layer{i}.weight"), &mut c.weight));
                out.push((format!("layer{i}.bias"), &mut c.bias));
            }
        }
        out
    }
}
