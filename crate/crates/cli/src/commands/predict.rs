use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use vstain_core::net::{load_checkpoint, predict_fov};
use vstain_core::FieldOfView;

use crate::exit::ChannelCountError;
use crate::manifest::RunRecord;

use super::{pgm_files, read_pgm, write_pgm};

#[derive(Debug, Clone)]
pub struct PredictArgs {
    pub checkpoint: PathBuf,
    pub fov_dir: PathBuf,
    /// Falls back to the training patch side stored in the checkpoint.
    pub tile_side: Option<usize>,
    /// Falls back to a quarter of the tile side.
    pub overlap: Option<usize>,
}

/// Splits `{prefix}_{channel}.pgm` into its two parts.
fn split_name(name: &str) -> Option<(&str, &str)> {
    name.strip_suffix(".pgm")?.split_once('_')
}

pub fn run_predict(args: &PredictArgs, out: &Path, mut record: RunRecord) -> Result<()> {
    let params = load_checkpoint(&args.checkpoint)?;
    let ckpt_dir = args.checkpoint.parent().unwrap_or(Path::new("."));
    record.add_input("checkpoint", ckpt_dir, &args.checkpoint)?;
    let tile = args.tile_side.unwrap_or(params.discriminator_config.side);
    let overlap = args.overlap.unwrap_or(tile / 4);

    let wanted = &params.input_channels;
    let mut groups: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    for name in pgm_files(&args.fov_dir)? {
        if let Some((prefix, channel)) = split_name(&name) {
            if wanted.iter().any(|w| w == channel) {
                groups.entry(prefix.to_string()).or_default().push((channel.to_string(), name.clone()));
            }
        }
    }
    if groups.is_empty() {
        return Err(ChannelCountError {
            what: format!("checkpoint inputs {wanted:?} in {}", args.fov_dir.display()),
            expected: wanted.len(),
            actual: 0,
        }
        .into());
    }
    for (prefix, files) in &groups {
        let mut fov = FieldOfView::new();
        for (channel, name) in files {
            let path = args.fov_dir.join(name);
            fov.insert(channel.clone(), read_pgm(&path)?)?;
            record.add_input("fov", &args.fov_dir, &path)?;
        }
        let depth = fov.channels()[0].1.source_bit_depth();
        let pred = predict_fov(&params, &fov, tile, overlap).with_context(|| format!("predicting field of view {prefix}"))?;
        let name = format!("{prefix}_{}.pgm", params.target_channel);
        write_pgm(&out.join(&name), &pred, depth)?;
        println!("{name}");
    }
    record.finish()
}

#[cfg(test)]
mod tests {
    use super::split_name;

    #[test]
    fn names_split_at_first_underscore() {
        assert_eq!(split_name("s0001_nucleus.pgm"), Some(("s0001", "nucleus")));
        assert_eq!(split_name("a_b_c.pgm"), Some(("a", "b_c")));
        assert_eq!(split_name("plain.pgm"), None);
        assert_eq!(split_name("x_y.txt"), None);
    }
}
