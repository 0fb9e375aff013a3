//! Process exit codes and their mapping from error chains.

use thiserror::Error;
use vstain_core::net::NetError;
use vstain_core::{ImageError, MetricsError};

use crate::config::ConfigError;

pub const OK: i32 = 0;
pub const USAGE: i32 = 1;
pub const NUMERIC: i32 = 2;
pub const SHAPE: i32 = 3;
pub const ALIGNMENT: i32 = 4;

/// Prediction and ground-truth directories disagree on file names.
#[derive(Debug, Error)]
#[error("{} file(s) without a counterpart: {}", orphans.len(), orphans.join(", "))]
pub struct AlignmentError {
    pub orphans: Vec<String>,
}

/// Training diverged; the last good parameters were still written.
#[derive(Debug, Error)]
#[error("training diverged; last good checkpoint retained at {checkpoint}")]
pub struct NumericFailure {
    pub checkpoint: String,
    #[source]
    pub source: NetError,
}

/// A model/data shape disagreement discovered outside the core library.
#[derive(Debug, Error)]
#[error("channel mismatch: {what} expects {expected} channel(s), found {actual}")]
pub struct ChannelCountError {
    pub what: String,
    pub expected: usize,
    pub actual: usize,
}

fn net_code(e: &NetError) -> Option<i32> {
    match e {
        NetError::NonFinite { .. } | NetError::NonFiniteGradient { .. } => Some(NUMERIC),
        NetError::ChannelMismatch { .. } | NetError::Shape(_) => Some(SHAPE),
        NetError::Image(ImageError::Channel(_)) => Some(SHAPE),
        _ => None,
    }
}

/// Picks the exit code for the first recognised error in the chain.
pub fn code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<NumericFailure>() {
            return NUMERIC;
        }
        if cause.is::<AlignmentError>() {
            return ALIGNMENT;
        }
        if cause.is::<ChannelCountError>() {
            return SHAPE;
        }
        if cause.is::<ConfigError>() {
            return USAGE;
        }
        if let Some(code) = cause.downcast_ref::<NetError>().and_then(net_code) {
            return code;
        }
        if let Some(MetricsError::DimensionMismatch(..)) = cause.downcast_ref::<MetricsError>() {
            return SHAPE;
        }
    }
    USAGE
}
