//! Dataset directories: PGM rasters plus a `key=value` manifest.
//!
//! ```text
//! manifest.txt
//! s0000_nucleus.pgm  s0000_membrane.pgm  s0000_target.pgm  ...
//! af0000_defocused.pgm  af0000_focused.pgm  ...
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{AfSample, SynthError};
use crate::imgcore::{load_pgm, save_pgm, BitDepth, FieldOfView, ImageGrid};

pub const MANIFEST: &str = "manifest.txt";
const FORMAT: &str = "vstain-dataset";
const VERSION: u32 = 1;

/// Contents of a dataset directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub bit_depth: BitDepth,
    pub channels: Vec<String>,
    pub scenes: Vec<FieldOfView>,
    pub af_channel: Option<String>,
    pub af_samples: Vec<AfSample>,
}

pub fn scene_file(index: usize, channel: &str) -> String {
    format!("s{index:04}_{channel}.pgm")
}

pub fn af_input_file(index: usize) -> String {
    format!("af{index:04}_defocused.pgm")
}

pub fn af_target_file(index: usize) -> String {
    format!("af{index:04}_focused.pgm")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.display().to_string(), source }
}

fn write_image(dir: &Path, name: &str, img: &ImageGrid, depth: BitDepth, written: &mut Vec<PathBuf>) -> Result<(), SynthError> {
    let path = dir.join(name);
    fs::write(&path, save_pgm(img, depth)).map_err(io_err(&path))?;
    written.push(path);
    Ok(())
}

/// Writes `dataset` under `dir` and returns every file created, manifest last.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<Vec<PathBuf>, SynthError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut m = String::new();
    let mut kv = |k: &str, v: String| {
        m.push_str(k);
        m.push('=');
        m.push_str(&v);
        m.push('\n');
    };
    kv("format", FORMAT.into());
    kv("version", VERSION.to_string());
    kv("seed", dataset.seed.to_string());
    kv("width", dataset.width.to_string());
    kv("height", dataset.height.to_string());
    kv("bit_depth", dataset.bit_depth.bits().to_string());
    kv("scenes", dataset.scenes.len().to_string());
    kv("channels", dataset.channels.join(","));
    for (i, fov) in dataset.scenes.iter().enumerate() {
        for ch in &dataset.channels {
            write_image(dir, &scene_file(i, ch), fov.require(ch)?, dataset.bit_depth, &mut written)?;
        }
    }
    if let Some(ch) = &dataset.af_channel {
        kv("af_channel", ch.clone());
        kv("af_samples", dataset.af_samples.len().to_string());
        for (i, s) in dataset.af_samples.iter().enumerate() {
            kv(&format!("af.{i}.scene"), s.scene.to_string());
            kv(&format!("af.{i}.z"), s.z.to_string());
            kv(&format!("af.{i}.near_focus"), u8::from(s.near_focus).to_string());
            write_image(dir, &af_input_file(i), &s.defocused, dataset.bit_depth, &mut written)?;
            write_image(dir, &af_target_file(i), &s.focused, dataset.bit_depth, &mut written)?;
        }
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, m).map_err(io_err(&path))?;
    written.push(path);
    Ok(written)
}

/// Parses `key=value` lines; blank lines and `#` comments are ignored.
pub fn parse_manifest(text: &str) -> Result<BTreeMap<String, String>, SynthError> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| SynthError::Manifest(format!("line {}: expected key=value", n + 1)))?;
        if out.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(SynthError::Manifest(format!("line {}: duplicate key `{}`", n + 1, k.trim())));
        }
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(m: &BTreeMap<String, String>, key: &str) -> Result<T, SynthError> {
    let raw = m.get(key).ok_or_else(|| SynthError::Manifest(format!("missing key `{key}`")))?;
    raw.parse().map_err(|_| SynthError::Manifest(format!("bad value `{raw}` for `{key}`")))
}

fn read_image(dir: &Path, name: &str) -> Result<ImageGrid, SynthError> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    Ok(load_pgm(&bytes)?)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset, SynthError> {
    let mpath = dir.join(MANIFEST);
    let m = parse_manifest(&fs::read_to_string(&mpath).map_err(io_err(&mpath))?)?;
    let format: String = field(&m, "format")?;
    let version: u32 = field(&m, "version")?;
    if format != FORMAT || version != VERSION {
        return Err(SynthError::Manifest(format!("unsupported dataset {format} v{version}")));
    }
    let bits: u32 = field(&m, "bit_depth")?;
    let bit_depth =
        BitDepth::from_bits(bits).ok_or_else(|| SynthError::Manifest(format!("bit_depth {bits} unsupported")))?;
    let n_scenes: usize = field(&m, "scenes")?;
    let channels: Vec<String> = field::<String>(&m, "channels")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    let mut scenes = Vec::with_capacity(n_scenes);
    for i in 0..n_scenes {
        let mut fov = FieldOfView::new();
        for ch in &channels {
            fov.insert(ch.clone(), read_image(dir, &scene_file(i, ch))?)?;
        }
        scenes.push(fov);
    }
    let af_channel: Option<String> = m.get("af_channel").cloned();
    let mut af_samples = Vec::new();
    if af_channel.is_some() {
        let n: usize = field(&m, "af_samples")?;
        for i in 0..n {
            af_samples.push(AfSample {
                defocused: read_image(dir, &af_input_file(i))?,
                focused: read_image(dir, &af_target_file(i))?,
                z: field(&m, &format!("af.{i}.z"))?,
                scene: field(&m, &format!("af.{i}.scene"))?,
                near_focus: field::<u8>(&m, &format!("af.{i}.near_focus"))? != 0,
            });
        }
    }
    Ok(Dataset {
        seed: field(&m, "seed")?,
        width: field(&m, "width")?,
        height: field(&m, "height")?,
        bit_depth,
        channels,
        scenes,
        af_channel,
        af_samples,
    })
}
