//! Intermediate State Generator.
//!
//! A generator predicts the slice halfway between two given slices; a small
//! discriminator scores single images as real or synthetic. Training
//! alternates reconstruction-only epochs with adversarial ones.
//!
//! Slices enter the networks as `[1, S, S]` tensors scaled to `[0, 1]`.

mod loss;
mod model;
mod train;
mod triplet;

pub use loss::{
    bce_graph, discriminator_loss, generator_loss, reconstruction_loss, reconstruction_loss_graph, PRED_CLAMP,
};
pub use model::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, IsGenModel};
pub use train::{
    adversarial_step, nonadversarial_step, on_off_train, validation_loss, EpochLog, Mode, StepLosses, TrainConfig,
    TrainLog,
};
pub use triplet::{sample_triplet, sample_triplets, slice_to_tensor, tensor_to_slice, Triplet};

use crate::tensorkit::TensorError;
use crate::volume::VolumeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IsGenError {
    #[error("volume has {n} slices but at least {needed} are required")]
    VolumeTooThin { n: usize, needed: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IsGenError>;
