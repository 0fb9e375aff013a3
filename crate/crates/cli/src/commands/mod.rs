mod eval;
mod predict;
mod synth;
mod train;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use vstain_core::imgcore::{load_pgm, save_pgm};
use vstain_core::{BitDepth, ImageGrid};

pub use eval::{run_eval, EvalArgs};
pub use predict::{run_predict, PredictArgs};
pub use synth::run_synth;
pub use train::run_train;

pub(crate) fn read_pgm(path: &Path) -> Result<ImageGrid> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_pgm(&bytes).with_context(|| format!("decoding {}", path.display()))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn write_pgm(path: &Path, img: &ImageGrid, depth: BitDepth) -> Result<()> {
    write_bytes(path, &save_pgm(img, depth))
}

/// `.pgm` files directly inside `dir`, sorted by name.
pub(crate) fn pgm_files(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(".pgm") {
                names.push(name);
            }
        }
    }
    names.sort();
    Ok(names)
}
