use rand::Rng;

use super::{FieldOfView, ImageError, ImageGrid};

/// Number of elements in the dihedral group of the square.
pub const D4_ORDER: usize = 8;

/// Square multi-channel patch with values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPatch {
    side: usize,
    names: Vec<String>,
    channels: Vec<Vec<f64>>,
}

impl NormalizedPatch {
    pub fn new(side: usize, names: Vec<String>, channels: Vec<Vec<f64>>) -> Result<Self, ImageError> {
        if side == 0 || channels.is_empty() || names.len() != channels.len() {
            return Err(ImageError::Dimension("patch needs a positive side and one name per channel".into()));
        }
        for (name, ch) in names.iter().zip(&channels) {
            if ch.len() != side * side {
                return Err(ImageError::LengthMismatch { expected: side * side, actual: ch.len() });
            }
            if let Some((index, &value)) =
                ch.iter().enumerate().find(|(_, v)| !(v.is_finite() && (-1.0..=1.0).contains(*v)))
            {
                return Err(ImageError::Channel(format!(
                    "channel `{name}` value {value} at {index} is outside [-1, 1]"
                )));
            }
        }
        Ok(Self { side, names, channels })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.channels[i].as_slice())
    }
}

/// Maps `[0, 1]` intensities to `[-1, 1]` by `v -> 2v - 1`.
pub fn normalize(img: &ImageGrid) -> Vec<f64> {
    img.values().iter().map(|v| 2.0 * v - 1.0).collect()
}

/// Inverse of [`normalize`], clamped against floating drift.
pub fn denormalize(width: usize, height: usize, values: &[f64]) -> Result<ImageGrid, ImageError> {
    let v = values.iter().map(|v| ((v + 1.0) * 0.5).clamp(0.0, 1.0)).collect();
    ImageGrid::new(width, height, v)
}

/// Crops the same randomly placed `side x side` window from every channel.
///
/// The row offset is drawn first, then the column offset, each uniform over
/// the valid range.
pub fn random_crop<R: Rng + ?Sized>(
    fov: &FieldOfView,
    side: usize,
    rng: &mut R,
) -> Result<(NormalizedPatch, (usize, usize)), ImageError> {
    if fov.is_empty() {
        return Err(ImageError::Channel("field of view has no channels".into()));
    }
    let (w, h) = (fov.width(), fov.height());
    if side == 0 || side > w.min(h) {
        return Err(ImageError::Dimension(format!("patch side {side} does not fit in {w}x{h}")));
    }
    let row = rng.random_range(0..=h - side);
    let col = rng.random_range(0..=w - side);
    let mut names = Vec::with_capacity(fov.len());
    let mut channels = Vec::with_capacity(fov.len());
    for (name, img) in fov.channels() {
        names.push(name.clone());
        channels.push(normalize(&img.crop(row, col, side, side)?));
    }
    Ok((NormalizedPatch { side, names, channels }, (row, col)))
}

fn rot90(src: &[f64], n: usize) -> Vec<f64> {
    // counter-clockwise: out[r][c] = in[c][n-1-r]
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = src[c * n + (n - 1 - r)];
        }
    }
    out
}

fn flip_horizontal(src: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = src[r * n + (n - 1 - c)];
        }
    }
    out
}

/// Applies D4 element `op_index`: a horizontal flip when `op_index >= 4`,
/// followed by `op_index % 4` counter-clockwise quarter turns.
pub fn augment(patch: &NormalizedPatch, op_index: usize) -> Result<NormalizedPatch, ImageError> {
    if op_index >= D4_ORDER {
        return Err(ImageError::AugmentIndex(op_index));
    }
    let n = patch.side;
    let channels = patch
        .channels
        .iter()
        .map(|ch| {
            let mut v = if op_index >= 4 { flip_horizontal(ch, n) } else { ch.clone() };
            for _ in 0..op_index % 4 {
                v = rot90(&v, n);
            }
            v
        })
        .collect();
    Ok(NormalizedPatch { side: n, names: patch.names.clone(), channels })
}
