//! Conditional GAN: U-Net generator, convolutional discriminator, composite
//! loss, Adam, training loops, checkpoints and tiled inference.

mod adam;
mod checkpoint;
mod data;
mod discriminator;
mod gemm;
pub mod gradcheck;
mod generator;
mod init;
pub mod layers;
mod loss;
mod params;
mod predict;
mod tensor;
mod train;

use std::path::PathBuf;

use thiserror::Error;

use crate::imgcore::ImageError;
use crate::metrics::MetricsError;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use data::{PairSample, PairSet, AF_INPUT, AF_TARGET};
pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use generator::{Generator, GeneratorConfig, Mode};
pub use loss::{discriminator_loss, generator_loss, LossBreakdown, LossWeights, MaeForm, SCORE_EPS};
pub use params::{ModelParams, Param, ParamSet};
pub use predict::{predict_fov, predict_patch};
pub use tensor::Tensor;
pub use train::{history_csv, train_af, train_cgan, validation_mae, HistoryRow, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("channel mismatch: model expects {expected} input channel(s) {names:?}, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize, names: Vec<String> },
    #[error("non-finite gradient in parameter {param}")]
    NonFiniteGradient { param: String },
    #[error("non-finite {what} at step {step}")]
    NonFinite { what: String, step: usize },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}
