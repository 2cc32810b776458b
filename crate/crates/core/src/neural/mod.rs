//! Recurrent SMILES language model written from scratch: forward pass,
//! sampling, exact sequence likelihood, BPTT and RMSprop.

pub mod checkpoint;
pub mod gru;
pub mod optim;
pub mod params;

use thiserror::Error;

pub use checkpoint::Checkpoint;
pub use gru::{
    backprop_nll, backprop_weighted, batch_nll, forward_batch, forward_step, sample_batch, sequence_nll, HiddenState,
    Sample,
};
pub use optim::{Direction, OptimizerState, RmsPropConfig};
pub use params::{GruLayer, ModelDims, ModelParams};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("empty batch")]
    EmptyBatch,
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Deep copy of a parameter set; later updates to either side are independent.
pub fn clone_params(params: &ModelParams) -> ModelParams {
    params.clone_params()
}
