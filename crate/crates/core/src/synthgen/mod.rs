//! Synthetic ground truth: procedural cell scenes and Gaussian defocus.

mod afdata;
pub mod persist;
mod psf;
mod render;
mod scene;

pub use afdata::{is_near_focus, make_af_dataset, AfDataset, AfOptions, AfSample, NearFocusPolicy, Z_RANGE_UM};
pub use psf::{convolve_reflect, gaussian_blur, gaussian_kernel_1d, defocus, PsfModel};
pub use render::{
    add_noise, make_channel_dataset, render_channels, render_clean, CHANNEL_MEMBRANE, CHANNEL_NUCLEUS,
    CHANNEL_TARGET, TARGET_BLUR_SIGMA, TARGET_MEMBRANE_WEIGHT, TARGET_NUCLEUS_WEIGHT,
};
pub use scene::{gen_scene, scene_seed, CellScene, Filament, Nucleus, SceneSpec};

use thiserror::Error;

use crate::imgcore::ImageError;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("scene geometry is infeasible: {0}")]
    Infeasible(String),
    #[error("invalid PSF: {0}")]
    InvalidPsf(String),
    #[error("z = {0} um lies outside the supported range [-12, 8] um")]
    ZOutOfRange(f64),
    #[error("no admissible z values: every requested plane lies in the near-focus band |z| <= 2 um")]
    EmptyDataset,
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("dataset I/O on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed dataset manifest: {0}")]
    Manifest(String),
}
