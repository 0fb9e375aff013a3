//! Image fidelity metrics and the thresholded prediction-error index.

mod basic;
mod error_index;
mod pearson;
mod ssim;

pub use basic::{evaluate_pairs, mae, mse, psnr, AggregateReport, MetricReport};
pub use error_index::{
    error_index, error_index_with, error_mask, otsu_threshold, quantized_errors, ErrorIndexCurve, ErrorIndexMode,
    ErrorIndexOptions, ErrorMask, IeScale, MAX_THRESHOLD,
};
pub use pearson::pearson;
pub use ssim::{ssim, SSIM_WINDOW};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    TooSmall { width: usize, height: usize, window: usize },
    #[error("series lengths differ ({0} vs {1}) or are shorter than 2")]
    SeriesLength(usize, usize),
    #[error("correlation is undefined: {0} series is constant")]
    UndefinedCorrelation(&'static str),
    #[error("ground truth has no foreground after Otsu thresholding; signal-normalized SE is undefined")]
    EmptyForeground,
    #[error("invalid weights: beta1={0}, beta2={1}")]
    InvalidWeights(f64, f64),
    #[error("prediction and ground-truth lists differ in length ({0} vs {1}) or are empty")]
    ListLength(usize, usize),
    #[error("threshold {0} is outside 0..=255")]
    Threshold(u32),
}

use crate::imgcore::ImageGrid;

pub(crate) fn check_dims(a: &ImageGrid, b: &ImageGrid) -> Result<(), MetricsError> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(MetricsError::DimensionMismatch(a.width(), a.height(), b.width(), b.height()))
    }
}
