use rand_distr::{Distribution, Normal};

use super::ParamSet;
use crate::rng;

/// Standard deviation of the normal weight initializer.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Init {
    Normal,
    Zeros,
    Ones,
}

/// Declared tensors in order; indices returned by [`Layout::add`] address the
/// resulting [`ParamSet`].
#[derive(Debug, Clone, Default)]
pub(crate) struct Layout {
    specs: Vec<(String, usize, Init, bool)>,
}

/// Indices of one batch-norm layer's tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct BnIdx {
    pub gamma: usize,
    pub beta: usize,
    pub mean: usize,
    pub var: usize,
}

impl Layout {
    pub fn add(&mut self, name: String, len: usize, init: Init, trainable: bool) -> usize {
        self.specs.push((name, len, init, trainable));
        self.specs.len() - 1
    }

    pub fn batch_norm(&mut self, prefix: &str, channels: usize) -> BnIdx {
        BnIdx {
            gamma: self.add(format!("{prefix}.bn.gamma"), channels, Init::Ones, true),
            beta: self.add(format!("{prefix}.bn.beta"), channels, Init::Zeros, true),
            mean: self.add(format!("{prefix}.bn.mean"), channels, Init::Zeros, false),
            var: self.add(format!("{prefix}.bn.var"), channels, Init::Ones, false),
        }
    }

    /// Materializes the tensors, drawing normal weights from the stream `label`.
    pub fn build(&self, seed: u64, label: &str) -> ParamSet {
        let mut r = rng::stream(seed, label);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut set = ParamSet::new();
        for (name, len, init, trainable) in &self.specs {
            let values = match init {
                Init::Normal => (0..*len).map(|_| normal.sample(&mut r)).collect(),
                Init::Zeros => vec![0.0; *len],
                Init::Ones => vec![1.0; *len],
            };
            set.push(name.clone(), values, *trainable);
        }
        set.snap_f32();
        set
    }

    pub fn matches(&self, params: &ParamSet) -> bool {
        params.len() == self.specs.len()
            && self.specs.iter().zip(params.iter()).all(|((n, l, _, t), p)| *n == p.name && *l == p.values.len() && *t == p.trainable)
    }
}
