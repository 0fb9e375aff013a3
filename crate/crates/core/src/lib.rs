//! Image-to-image regression toolkit for virtual fluorescence staining.
//!
//! The crate is organised around four subsystems:
//!
//! * [`imgcore`]: intensity rasters, PGM I/O, patch sampling, augmentation,
//!   histogram equalization and alpha-blended tile stitching.
//! * [`synthgen`]: procedural multi-channel cell scenes with a closed-form
//!   cross-channel target, plus a Gaussian defocus model for refocusing data.
//! * [`net`]: a conditional GAN (U-Net generator, convolutional discriminator)
//!   with hand-written backpropagation, Adam, training loops and tiled inference.
//! * [`metrics`]: MAE/PSNR/SSIM, the thresholded intensity/segmentation error
//!   index, error masks and Pearson correlation.

pub mod imgcore;
pub mod metrics;
pub mod net;
pub mod rng;
pub mod synthgen;

pub use imgcore::{BitDepth, FieldOfView, ImageError, ImageGrid, NormalizedPatch, TileLayout};
pub use metrics::{ErrorIndexCurve, ErrorMask, MetricReport, MetricsError};
pub use net::{
    DiscriminatorConfig, GeneratorConfig, LossWeights, ModelParams, NetError, Tensor, TrainConfig,
};
pub use synthgen::{AfSample, CellScene, PsfModel, SceneSpec, SynthError};
