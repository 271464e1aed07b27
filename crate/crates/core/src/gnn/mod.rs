//! GIN, GGRNet and GAIN regressors.
//!
//! All three share a GIN convolution (`MLP((1+ε)·h_v + Σ h_u)`, ReLU,
//! batchnorm) on the 48 input features, sum readout and a two-layer head.
//! GGRNet inserts ten shared-weight gated updates with a skip connection;
//! GAIN inserts one single-head neighbourhood attention layer.

mod checkpoint;
pub mod layers;
mod model;

pub use checkpoint::{
    BufferRecord, Checkpoint, CheckpointError, ParamRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
pub use model::{
    ForwardPass, Mode, Model, ModelConfig, ModelKind, Param, RUNNING_MEAN, RUNNING_VAR,
};

use thiserror::Error;

use crate::autodiff::AutodiffError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GnnError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),
    #[error("input width {found} does not match model input {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
}
