//! Minimal dense-network math with analytic backprop.
//!
//! Everything here works on plain `f64` slices. Networks are values, the
//! forward pass returns a cache, and the backward pass turns an output
//! cotangent into exact parameter and input gradients. That input-gradient
//! path is what lets the trainer push critic gradients through sampled
//! actions back into an actor.

mod adam;
mod dense;
mod gumbel;

pub use adam::{adam_step, AdamParams, AdamState};
pub use dense::{DenseNet, ForwardCache, Layer, LayerGrads, NetGrads};
pub use gumbel::{gumbel_backward, gumbel_softmax, sample_gumbel_noise, GumbelSample, SampleMode};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("layer sizes must all be positive, got {0:?}")]
    BadLayerSizes(Vec<usize>),
    #[error("input has length {got}, network expects {expected}")]
    InputDim { got: usize, expected: usize },
    #[error("output cotangent has length {got}, network produces {expected}")]
    OutputDim { got: usize, expected: usize },
    #[error("forward cache does not match this network")]
    StaleCache,
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("gradient shapes do not match network parameters")]
    GradShape,
}
