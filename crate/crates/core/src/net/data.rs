use rand::seq::SliceRandom;

use super::NetError;
use crate::imgcore::{histogram_equalize, FieldOfView, ImageGrid};
use crate::rng;
use crate::synthgen::{is_near_focus, AfSample};

/// Input channel name used for refocusing pairs.
pub const AF_INPUT: &str = "defocused";
/// Target channel name used for refocusing pairs.
pub const AF_TARGET: &str = "focused";

/// One co-registered training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub inputs: Vec<ImageGrid>,
    pub target: ImageGrid,
    /// Samples sharing a group (a scene) never straddle the validation split.
    pub group: usize,
}

impl PairSample {
    /// Inputs followed by the target, as one field of view. A target that
    /// repeats an input name is not added twice.
    pub fn to_fov(&self, input_names: &[String], target_name: &str) -> Result<FieldOfView, NetError> {
        let mut fov = FieldOfView::new();
        for (n, img) in input_names.iter().zip(&self.inputs) {
            fov.insert(n.clone(), img.clone())?;
        }
        if fov.get(target_name).is_none() {
            fov.insert(target_name, self.target.clone())?;
        }
        Ok(fov)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub input_names: Vec<String>,
    pub target_name: String,
    pub samples: Vec<PairSample>,
    /// Candidate pairs rejected while building the set.
    pub skipped: usize,
}

impl PairSet {
    /// Channel-to-channel pairs, one per scene. The target may also be an
    /// input, which gives the identity task.
    pub fn from_scenes(scenes: &[FieldOfView], inputs: &[String], target: &str) -> Result<Self, NetError> {
        if inputs.is_empty() {
            return Err(NetError::Config("at least one input channel is required".into()));
        }
        let mut samples = Vec::with_capacity(scenes.len());
        for (i, fov) in scenes.iter().enumerate() {
            let inputs = inputs.iter().map(|n| fov.require(n).cloned()).collect::<Result<Vec<_>, _>>()?;
            samples.push(PairSample { inputs, target: fov.require(target)?.clone(), group: i });
        }
        Ok(Self { input_names: inputs.to_vec(), target_name: target.to_string(), samples, skipped: 0 })
    }

    /// Refocusing pairs grouped by scene. Near-focus planes are skipped and
    /// counted.
    pub fn from_af(samples: &[AfSample]) -> Self {
        let mut out = Vec::new();
        let mut skipped = 0;
        for s in samples {
            if s.near_focus || is_near_focus(s.z) {
                skipped += 1;
                continue;
            }
            out.push(PairSample { inputs: vec![s.defocused.clone()], target: s.focused.clone(), group: s.scene });
        }
        Self { input_names: vec![AF_INPUT.into()], target_name: AF_TARGET.into(), samples: out, skipped }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Replaces every input with its histogram-equalized version.
    pub fn equalize_inputs(&mut self) {
        for s in &mut self.samples {
            for img in &mut s.inputs {
                *img = histogram_equalize(img);
            }
        }
    }

    /// Splits sample indices into `(train, validation)` by shuffling groups
    /// with the seed. With a single group both sides get every sample.
    pub fn split(&self, seed: u64, val_fraction: f64) -> (Vec<usize>, Vec<usize>) {
        let mut groups: Vec<usize> = self.samples.iter().map(|s| s.group).collect();
        groups.sort_unstable();
        groups.dedup();
        let all: Vec<usize> = (0..self.samples.len()).collect();
        if groups.len() < 2 || val_fraction <= 0.0 {
            return (all.clone(), if val_fraction <= 0.0 { Vec::new() } else { all });
        }
        groups.shuffle(&mut rng::stream(seed, "split"));
        let n_val = ((groups.len() as f64 * val_fraction).round() as usize).clamp(1, groups.len() - 1);
        let val_groups = &groups[..n_val];
        all.into_iter().partition(|&i| !val_groups.contains(&self.samples[i].group))
    }
}
