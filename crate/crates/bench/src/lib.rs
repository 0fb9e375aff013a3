//! Shared fixtures for the criterion benchmarks.

use vstain_core::net::PairSet;
use vstain_core::synthgen::make_channel_dataset;
use vstain_core::{ImageGrid, SceneSpec};

/// Deterministic pseudo-random image in `[0, 1]`.
pub fn noise_image(width: usize, height: usize, seed: u64) -> ImageGrid {
    let mut state = seed;
    ImageGrid::from_fn(width, height, |_, _| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    })
    .expect("non-empty raster")
}

/// Nucleus + membrane -> target pairs from `count` 64x64 scenes.
pub fn channel_pairs(count: usize) -> PairSet {
    let scenes = make_channel_dataset(&SceneSpec::default(), count).expect("default spec is valid");
    PairSet::from_scenes(&scenes, &["nucleus".into(), "membrane".into()], "target").expect("channels exist")
}
