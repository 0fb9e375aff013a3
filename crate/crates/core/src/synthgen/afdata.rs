use super::psf::defocus;
use super::render::{add_noise, render_clean};
use super::scene::{gen_scene, scene_seed};
use super::{PsfModel, SceneSpec, SynthError};
use crate::imgcore::ImageGrid;

/// Supported axial range in micrometres.
pub const Z_RANGE_UM: (f64, f64) = (-12.0, 8.0);
/// Planes with `|z|` at or below this are indistinguishable from focus.
pub const NEAR_FOCUS_UM: f64 = 2.0;

pub fn is_near_focus(z_um: f64) -> bool {
    z_um.abs() <= NEAR_FOCUS_UM
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NearFocusPolicy {
    /// Drop near-focus planes and count them.
    #[default]
    Exclude,
    /// Keep them, marked with `near_focus = true`.
    Flag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AfOptions {
    pub scenes: usize,
    pub channel: String,
    pub policy: NearFocusPolicy,
}

impl Default for AfOptions {
    fn default() -> Self {
        Self { scenes: 1, channel: super::CHANNEL_MEMBRANE.to_string(), policy: NearFocusPolicy::Exclude }
    }
}

/// A defocused/focused training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AfSample {
    pub defocused: ImageGrid,
    pub focused: ImageGrid,
    pub z: f64,
    pub scene: usize,
    pub near_focus: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AfDataset {
    pub samples: Vec<AfSample>,
    /// Near-focus planes dropped under [`NearFocusPolicy::Exclude`].
    pub skipped: usize,
}

/// Builds refocusing pairs: per scene one focused render, reused for every
/// admissible defocused plane.
pub fn make_af_dataset(
    spec: &SceneSpec,
    z_values: &[f64],
    psf: &PsfModel,
    opts: &AfOptions,
) -> Result<AfDataset, SynthError> {
    psf.validate()?;
    for &z in z_values {
        if !(z.is_finite() && z >= Z_RANGE_UM.0 && z <= Z_RANGE_UM.1) {
            return Err(SynthError::ZOutOfRange(z));
        }
    }
    let admissible: Vec<(usize, f64)> = z_values
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, z)| opts.policy == NearFocusPolicy::Flag || !is_near_focus(z))
        .collect();
    if admissible.is_empty() || opts.scenes == 0 {
        return Err(SynthError::EmptyDataset);
    }
    let dropped_per_scene = z_values.len() - admissible.len();
    let mut samples = Vec::with_capacity(opts.scenes * admissible.len());
    for i in 0..opts.scenes {
        let s = SceneSpec { seed: scene_seed(spec.seed, i), ..spec.clone() };
        let scene = gen_scene(&s)?;
        let clean = render_clean(&scene)?;
        let channel = clean.require(&opts.channel)?;
        let focused = add_noise(channel, s.noise_sigma, s.seed, &format!("noise/{}", opts.channel));
        for &(zi, z) in &admissible {
            let blurred = defocus(channel, z, psf);
            let defocused = add_noise(&blurred, s.noise_sigma, s.seed, &format!("af-noise/{zi}"));
            samples.push(AfSample { defocused, focused: focused.clone(), z, scene: i, near_focus: is_near_focus(z) });
        }
    }
    Ok(AfDataset { samples, skipped: dropped_per_scene * opts.scenes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SceneSpec {
        SceneSpec { width: 32, height: 32, nucleus_radius: 3.0..=5.0, ..SceneSpec::default() }
    }

    #[test]
    fn two_micron_grid_with_exclusion() {
        // -12..=8 in 2 um steps is 11 planes; -2, 0 and 2 fall in the band.
        let grid: Vec<f64> = (0..11).map(|i| -12.0 + 2.0 * i as f64).collect();
        let opts = AfOptions { scenes: 2, ..AfOptions::default() };
        let ds = make_af_dataset(&small(), &grid, &PsfModel::default(), &opts).unwrap();
        assert_eq!(ds.samples.len(), 2 * 8);
        assert_eq!(ds.skipped, 2 * 3);
        assert!(ds.samples.iter().all(|s| s.z.abs() > 2.0 && !s.near_focus));

        let listed = [-12.0, -10.0, -8.0, -6.0, -4.0, 4.0, 6.0, 8.0];
        let ds = make_af_dataset(&small(), &listed, &PsfModel::default(), &AfOptions::default()).unwrap();
        assert_eq!(ds.samples.len(), 8);
    }

    #[test]
    fn all_excluded_is_error() {
        let err = make_af_dataset(&small(), &[0.0], &PsfModel::default(), &AfOptions::default()).unwrap_err();
        assert!(matches!(err, SynthError::EmptyDataset));
        assert!(err.to_string().contains("near-focus"));
    }

    #[test]
    fn symmetric_planes_are_admissible() {
        let ds = make_af_dataset(&small(), &[-3.0, 3.0], &PsfModel::default(), &AfOptions::default()).unwrap();
        assert_eq!(ds.samples.len(), 2);
        assert!(ds.samples.iter().all(|s| !s.near_focus));
        assert_eq!(ds.samples[0].focused, ds.samples[1].focused);
        assert_ne!(ds.samples[0].defocused, ds.samples[1].defocused);
    }

    #[test]
    fn flag_policy_keeps_near_focus() {
        let opts = AfOptions { policy: NearFocusPolicy::Flag, ..AfOptions::default() };
        let ds = make_af_dataset(&small(), &[-1.0, 5.0], &PsfModel::default(), &opts).unwrap();
        assert_eq!(ds.samples.len(), 2);
        assert!(ds.samples[0].near_focus && !ds.samples[1].near_focus);
        assert_eq!(ds.skipped, 0);
    }

    #[test]
    fn out_of_range_z_rejected() {
        let err = make_af_dataset(&small(), &[9.0], &PsfModel::default(), &AfOptions::default()).unwrap_err();
        assert!(matches!(err, SynthError::ZOutOfRange(_)));
    }

    #[test]
    fn dataset_is_pure() {
        let z = [-8.0, 4.0];
        let a = make_af_dataset(&small(), &z, &PsfModel::default(), &AfOptions::default()).unwrap();
        let b = make_af_dataset(&small(), &z, &PsfModel::default(), &AfOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
