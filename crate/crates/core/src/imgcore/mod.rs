//! Intensity rasters and the patch/tile data pipeline.

mod grid;
mod hist;
mod patch;
pub mod pgm;
mod tile;

pub use grid::{BitDepth, FieldOfView, ImageGrid};
pub use hist::histogram_equalize;
pub use patch::{augment, denormalize, normalize, random_crop, NormalizedPatch, D4_ORDER};
pub use pgm::{load_pgm, save_pgm, save_ppm_rgb};
pub use tile::{blend_weight, stitch, tile_plan, TileLayout};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("expected {expected} values for the raster, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("value {value} at index {index} is outside [0, 1] or not finite")]
    ValueOutOfRange { index: usize, value: f64 },
    #[error("PGM parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("channel error: {0}")]
    Channel(String),
    #[error("augmentation index {0} is outside 0..8")]
    AugmentIndex(usize),
    #[error("stitch error: {0}")]
    Stitch(String),
}
