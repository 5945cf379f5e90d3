//! Dense feedforward networks: matrices, MLP forward/backward passes, Adam,
//! binary cross-entropy, seeded randomness and JSON checkpoints.

mod adam;
mod checkpoint;
mod loss;
mod matrix;
mod mlp;
mod rng;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{LayerRecord, MlpRecord};
pub use loss::{bce_terms, clamp_probability, PROB_CLAMP};
pub use matrix::Matrix;
pub use mlp::{Activation, ForwardCache, Gradients, Layer, LayerGradient, Mlp};
pub use rng::{seeded, seeded_stream, Rng};
