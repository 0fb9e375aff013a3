//! Binary Netpbm I/O.
//!
//! Reading accepts any P5 header that follows the Netpbm grammar (arbitrary
//! whitespace, `#` comments). Writing always emits the canonical form
//! `P5\n<w> <h>\n<maxval>\n` so canonical files round-trip byte for byte.

use super::{BitDepth, ImageError, ImageGrid};

fn parse_err(offset: usize, reason: impl Into<String>) -> ImageError {
    ImageError::Parse { offset, reason: reason.into() }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_separators(&mut self) -> Result<(), ImageError> {
        let start = self.pos;
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                Some(_) if self.pos == start => {
                    return Err(parse_err(self.pos, "expected whitespace"));
                }
                Some(_) => return Ok(()),
                None => return Err(parse_err(self.pos, "unexpected end of header")),
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ImageError> {
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value * 10 + u64::from(b - b'0');
            if value > u64::from(u32::MAX) {
                return Err(parse_err(start, format!("{what} is too large")));
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(parse_err(start, format!("expected {what}")));
        }
        Ok(value as u32)
    }
}

/// Parses a binary PGM (P5) with maxval 255 or 65535.
pub fn load_pgm(bytes: &[u8]) -> Result<ImageGrid, ImageError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(parse_err(0, "magic number is not P5"));
    }
    let mut h = Header { bytes, pos: 2 };
    h.skip_separators()?;
    let width = h.number("width")? as usize;
    h.skip_separators()?;
    let height = h.number("height")? as usize;
    h.skip_separators()?;
    let maxval_at = h.pos;
    let maxval = h.number("maxval")?;
    let depth = match maxval {
        255 => BitDepth::Eight,
        65535 => BitDepth::Sixteen,
        other => return Err(parse_err(maxval_at, format!("unsupported maxval {other}"))),
    };
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(parse_err(h.pos, "expected a single whitespace byte before the raster")),
    }
    if width == 0 || height == 0 {
        return Err(parse_err(0, format!("degenerate size {width}x{height}")));
    }
    let sample_bytes = if depth == BitDepth::Sixteen { 2 } else { 1 };
    let needed = width * height * sample_bytes;
    let payload = &bytes[h.pos..];
    if payload.len() < needed {
        return Err(parse_err(
            bytes.len(),
            format!("truncated raster: {} of {needed} bytes present", payload.len()),
        ));
    }
    if payload.len() > needed {
        return Err(parse_err(h.pos + needed, "trailing bytes after raster"));
    }
    let scale = f64::from(maxval);
    let values = match depth {
        BitDepth::Eight => payload.iter().map(|&b| f64::from(b) / scale).collect(),
        BitDepth::Sixteen => payload
            .chunks_exact(2)
            .map(|p| f64::from(u16::from_be_bytes([p[0], p[1]])) / scale)
            .collect(),
    };
    Ok(ImageGrid::new(width, height, values)?.with_bit_depth(depth))
}

/// Quantizes `v` in `[0, 1]` with round-half-up.
#[inline]
pub fn quantize(v: f64, maxval: u32) -> u32 {
    let m = f64::from(maxval);
    ((v * m + 0.5).floor()).clamp(0.0, m) as u32
}

/// Serializes as canonical binary PGM.
pub fn save_pgm(img: &ImageGrid, depth: BitDepth) -> Vec<u8> {
    let maxval = depth.maxval();
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    match depth {
        BitDepth::Eight => out.extend(img.values().iter().map(|&v| quantize(v, maxval) as u8)),
        BitDepth::Sixteen => {
            for &v in img.values() {
                out.extend_from_slice(&(quantize(v, maxval) as u16).to_be_bytes());
            }
        }
    }
    out
}

/// Serializes interleaved 8-bit RGB as binary PPM (P6).
pub fn save_ppm_rgb(width: usize, height: usize, rgb: &[[u8; 3]]) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height, "rgb buffer does not match {width}x{height}");
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for px in rgb {
        out.extend_from_slice(px);
    }
    out
}
