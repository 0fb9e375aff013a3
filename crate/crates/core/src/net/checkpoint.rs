//! Binary checkpoints: magic, version, a `key=value` architecture block and a
//! little-endian `f32` payload of every tensor in declaration order.

use std::collections::BTreeMap;
use std::path::Path;

use super::adam::AdamState;
use super::{DiscriminatorConfig, GeneratorConfig, ModelParams, NetError, ParamSet};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"VSTAINCK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn header_text(p: &ModelParams) -> String {
    let g = &p.generator_config;
    let d = &p.discriminator_config;
    let lines = [
        format!("generator.in_channels={}", g.in_channels),
        format!("generator.out_channels={}", g.out_channels),
        format!("generator.depth={}", g.depth),
        format!("generator.base_width={}", g.base_width),
        format!("generator.kernel={}", g.kernel),
        format!("generator.leaky_slope={:?}", g.leaky_slope),
        format!("discriminator.in_channels={}", d.in_channels),
        format!("discriminator.side={}", d.side),
        format!("discriminator.kernel={}", d.kernel),
        format!("discriminator.block_count={}", d.block_count),
        format!("discriminator.base_width={}", d.base_width),
        format!("discriminator.leaky_slope={:?}", d.leaky_slope),
        format!("input_channels={}", p.input_channels.join(",")),
        format!("target_channel={}", p.target_channel),
        format!("equalize_inputs={}", p.equalize_inputs),
        format!("generator.scalars={}", p.generator.scalar_count()),
        format!("discriminator.scalars={}", p.discriminator.scalar_count()),
    ];
    let mut s = lines.join("\n");
    s.push('\n');
    s
}

/// Serializes architecture and parameters. Values are written as `f32`.
pub fn write_checkpoint(p: &ModelParams) -> Vec<u8> {
    let text = header_text(p);
    let mut out = Vec::with_capacity(16 + text.len() + 4 * (p.generator.scalar_count() + p.discriminator.scalar_count()));
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    for set in [&p.generator, &p.discriminator] {
        for param in set.iter() {
            for v in &param.values {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> NetError {
    NetError::Checkpoint(msg.into())
}

fn field<T: std::str::FromStr>(map: &BTreeMap<&str, &str>, key: &str) -> Result<T, NetError> {
    let raw = map.get(key).ok_or_else(|| bad(format!("missing key {key}")))?;
    raw.parse().map_err(|_| bad(format!("invalid value {raw:?} for {key}")))
}

fn fill(set: &mut ParamSet, payload: &mut std::slice::ChunksExact<'_, u8>) -> Result<(), NetError> {
    for param in set.iter_mut() {
        for v in &mut param.values {
            let b = payload.next().ok_or_else(|| bad("payload truncated"))?;
            *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
        }
    }
    Ok(())
}

/// Parses a checkpoint. Optimizer moments start fresh.
pub fn read_checkpoint(bytes: &[u8]) -> Result<ModelParams, NetError> {
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let text_len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let text_end = 16usize.checked_add(text_len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("header truncated"))?;
    let text = std::str::from_utf8(&bytes[16..text_end]).map_err(|_| bad("header is not UTF-8"))?;
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed header line {line:?}")))?;
        map.insert(k, v);
    }
    let gcfg = GeneratorConfig {
        in_channels: field(&map, "generator.in_channels")?,
        out_channels: field(&map, "generator.out_channels")?,
        depth: field(&map, "generator.depth")?,
        base_width: field(&map, "generator.base_width")?,
        kernel: field(&map, "generator.kernel")?,
        leaky_slope: field(&map, "generator.leaky_slope")?,
    };
    let dcfg = DiscriminatorConfig {
        in_channels: field(&map, "discriminator.in_channels")?,
        side: field(&map, "discriminator.side")?,
        kernel: field(&map, "discriminator.kernel")?,
        block_count: field(&map, "discriminator.block_count")?,
        base_width: field(&map, "discriminator.base_width")?,
        leaky_slope: field(&map, "discriminator.leaky_slope")?,
    };
    let names: String = field(&map, "input_channels")?;
    let input_channels: Vec<String> = names.split(',').filter(|s| !s.is_empty()).map(String::from).collect();
    let target: String = field(&map, "target_channel")?;
    let mut params = ModelParams::init(gcfg, dcfg, input_channels, target, 0)?;
    params.equalize_inputs = field(&map, "equalize_inputs")?;
    let gs: usize = field(&map, "generator.scalars")?;
    let ds: usize = field(&map, "discriminator.scalars")?;
    if gs != params.generator.scalar_count() || ds != params.discriminator.scalar_count() {
        return Err(bad("declared parameter counts do not match the architecture"));
    }
    let payload = &bytes[text_end..];
    if payload.len() != 4 * (gs + ds) {
        return Err(bad(format!("payload has {} bytes, expected {}", payload.len(), 4 * (gs + ds))));
    }
    let mut chunks = payload.chunks_exact(4);
    fill(&mut params.generator, &mut chunks)?;
    fill(&mut params.discriminator, &mut chunks)?;
    params.generator_moments = AdamState::new(&params.generator);
    params.discriminator_moments = AdamState::new(&params.discriminator);
    Ok(params)
}

pub fn save_checkpoint(path: &Path, p: &ModelParams) -> Result<(), NetError> {
    std::fs::write(path, write_checkpoint(p)).map_err(|source| NetError::Io { path: path.to_path_buf(), source })
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, NetError> {
    let bytes = std::fs::read(path).map_err(|source| NetError::Io { path: path.to_path_buf(), source })?;
    read_checkpoint(&bytes)
}
