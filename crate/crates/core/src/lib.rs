//! Scene text reading at desk scale: a segmentation-based text detector, a
//! CTC word recognizer with dictionary-based error correction, and an
//! ICDAR-protocol evaluation harness for localization, word recognition and
//! end-to-end tasks.
//!
//! Numeric code is generic over the scalar type via [`Scalar`] (`f32`/`f64`);
//! the pipeline itself runs in `f64`, see the type aliases at the crate root.

pub mod ctc;
pub mod dataset;
pub mod detector;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod lexicon;
pub mod nn;
pub mod recognizer;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// Concrete instantiations used by the pipeline and the CLI.
pub type Tensor64 = tensor::Tensor<f64>;
pub type FrameProbs64 = ctc::FrameProbs<f64>;
pub type DetectorModel64 = detector::DetectorModel<f64>;
pub type RecognizerModel64 = recognizer::RecognizerModel<f64>;
