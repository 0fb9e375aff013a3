use std::path::Path;

use anyhow::{Context, Result};
use vstain_core::synthgen::persist::{write_dataset, Dataset, MANIFEST};
use vstain_core::synthgen::{
    make_af_dataset, make_channel_dataset, AfOptions, NearFocusPolicy, CHANNEL_MEMBRANE, CHANNEL_NUCLEUS,
    CHANNEL_TARGET,
};

use crate::config::RunConfig;
use crate::manifest::RunRecord;

pub fn run_synth(cfg: &RunConfig, out: &Path, record: RunRecord) -> Result<()> {
    let s = &cfg.scene;
    let scenes = make_channel_dataset(&s.spec, s.scenes).context("synthesizing scenes")?;
    let (af_channel, af_samples) = if s.af {
        let opts = AfOptions { scenes: s.af_scenes, channel: s.af_channel.clone(), policy: NearFocusPolicy::Exclude };
        let af = make_af_dataset(&s.spec, &s.z_values, &cfg.psf, &opts).context("synthesizing refocusing pairs")?;
        if af.skipped > 0 {
            eprintln!("excluded {} near-focus plane(s)", af.skipped);
        }
        (Some(s.af_channel.clone()), af.samples)
    } else {
        (None, Vec::new())
    };
    let dataset = Dataset {
        seed: s.spec.seed,
        width: s.spec.width,
        height: s.spec.height,
        bit_depth: s.bit_depth,
        channels: [CHANNEL_NUCLEUS, CHANNEL_MEMBRANE, CHANNEL_TARGET].map(String::from).to_vec(),
        scenes,
        af_channel,
        af_samples,
    };
    let written = write_dataset(out, &dataset).with_context(|| format!("writing dataset to {}", out.display()))?;
    println!(
        "wrote {} scene(s) and {} refocusing pair(s): {} files plus {MANIFEST}",
        dataset.scenes.len(),
        dataset.af_samples.len(),
        written.len() - 1
    );
    record.finish()
}
