//! Transformer encoder classifier over encoded clips: linear input
//! embedding, sinusoidal positions, post-norm self-attention layers, masked
//! mean pooling and a linear head. Gradients are derived by hand.

mod checkpoint;
mod config;
mod ops;
mod params;
mod positional;
mod transformer;

use thiserror::Error;

pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use config::ModelConfig;
pub use params::{init_params, LayerParams, Tensor, TransformerParameters};
pub use positional::sinusoidal_pe;
pub use transformer::{argmax, forward, forward_with_attention, loss_and_gradients, AttentionTensor, Batch};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("sample {0} has no unmasked frame")]
    EmptySample(usize),
    #[error("clip has {frames} frames, model accepts at most {max}")]
    TooLong { frames: usize, max: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
