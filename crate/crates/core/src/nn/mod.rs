//! A small 3D convolutional network with hand-written backprop.
//!
//! Samples are [`Tensor4`]s of `maps x depth x height x width`; batches
//! stack them in a [`Batch`]. Everything is generic over [`Real`] so the
//! same code trains in `f32` and is gradient-checked in `f64`.

mod adam;
mod checkpoint;
mod conv;
pub mod gradcheck;
mod layers;
mod network;
mod real;
mod tensor;
mod train;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest};
pub use conv::{conv3_backward, conv3_forward, Conv3Layer, ConvGeometry, ConvGrads};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use layers::{relu, relu_backward, softmax, softmax_xent, BatchNorm, Dense, DepthPool, Dropout};
pub use network::{build_network, ArchConfig, ConvSpec, Layer, Mode, Network};
pub use real::{axpy, dot, Real};
pub use tensor::{Batch, Tensor4};
pub use train::{accuracy, fit, TrainConfig};

use crate::data::EegtError;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid layer state: {0}")]
    State(String),
    #[error("input too small: {0}")]
    InputTooSmall(String),
    #[error("label {label} outside {classes} classes")]
    InvalidLabel { label: usize, classes: usize },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Eegt(#[from] EegtError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
