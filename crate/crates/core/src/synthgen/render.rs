use rand_distr::{Distribution, Normal};

use super::psf::{convolve_reflect, gaussian_kernel_1d};
use super::scene::{gen_scene, scene_seed, RING_SIGMA};
use super::{CellScene, SceneSpec, SynthError};
use crate::imgcore::{FieldOfView, ImageGrid};
use crate::rng;

pub const CHANNEL_NUCLEUS: &str = "nucleus";
pub const CHANNEL_MEMBRANE: &str = "membrane";
pub const CHANNEL_TARGET: &str = "target";

/// `target = clamp(0.6 * blur(membrane, 2 px) + 0.4 * nucleus)`.
pub const TARGET_MEMBRANE_WEIGHT: f64 = 0.6;
pub const TARGET_NUCLEUS_WEIGHT: f64 = 0.4;
pub const TARGET_BLUR_SIGMA: f64 = 2.0;

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

fn nucleus_raster(scene: &CellScene) -> Vec<f64> {
    let mut out = vec![0.0f64; scene.width * scene.height];
    for n in &scene.nuclei {
        let s = n.radius / 2.0;
        for r in 0..scene.height {
            for c in 0..scene.width {
                let d2 = (r as f64 - n.center.0).powi(2) + (c as f64 - n.center.1).powi(2);
                let v = n.intensity * (-d2 / (2.0 * s * s)).exp();
                let px = &mut out[r * scene.width + c];
                *px = px.max(v);
            }
        }
    }
    out
}

fn membrane_raster(scene: &CellScene) -> Vec<f64> {
    let mut out = vec![0.0f64; scene.width * scene.height];
    for r in 0..scene.height {
        for c in 0..scene.width {
            let p = (r as f64, c as f64);
            let mut v = 0.0f64;
            for n in &scene.nuclei {
                let d = ((p.0 - n.center.0).powi(2) + (p.1 - n.center.1).powi(2)).sqrt();
                v = v.max(n.intensity * (-(d - n.radius).powi(2) / (2.0 * RING_SIGMA * RING_SIGMA)).exp());
            }
            for f in &scene.filaments {
                let d = f.points.windows(2).map(|w| segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min);
                v = v.max(f.intensity * (-(d * d) / (2.0 * f.thickness * f.thickness)).exp());
            }
            out[r * scene.width + c] = v;
        }
    }
    out
}

/// Noise-free channels: `nucleus`, `membrane`, and the derived `target`.
pub fn render_clean(scene: &CellScene) -> Result<FieldOfView, SynthError> {
    let (w, h) = (scene.width, scene.height);
    let nucleus = nucleus_raster(scene);
    let membrane = membrane_raster(scene);
    let blurred = convolve_reflect(&membrane, w, h, &gaussian_kernel_1d(TARGET_BLUR_SIGMA));
    let target: Vec<f64> = blurred
        .iter()
        .zip(&nucleus)
        .map(|(m, n)| TARGET_MEMBRANE_WEIGHT * m + TARGET_NUCLEUS_WEIGHT * n)
        .collect();
    Ok(FieldOfView::new()
        .with(CHANNEL_NUCLEUS, ImageGrid::from_clamped(w, h, nucleus)?)?
        .with(CHANNEL_MEMBRANE, ImageGrid::from_clamped(w, h, membrane)?)?
        .with(CHANNEL_TARGET, ImageGrid::from_clamped(w, h, target)?)?)
}

/// Adds i.i.d. Gaussian noise drawn from the `(seed, label)` stream, then
/// clamps to `[0, 1]`.
pub fn add_noise(img: &ImageGrid, sigma: f64, seed: u64, label: &str) -> ImageGrid {
    if sigma == 0.0 {
        return img.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("noise sigma is finite and non-negative");
    let mut rng = rng::stream(seed, label);
    let values = img.values().iter().map(|v| v + normal.sample(&mut rng)).collect();
    ImageGrid::from_clamped(img.width(), img.height(), values)
        .expect("noise keeps geometry")
        .with_bit_depth(img.source_bit_depth())
}

/// Renders every channel and applies independent per-channel noise.
pub fn render_channels(scene: &CellScene, spec: &SceneSpec) -> Result<FieldOfView, SynthError> {
    let clean = render_clean(scene)?;
    let mut out = FieldOfView::new();
    for (name, img) in clean.channels() {
        out.insert(name.clone(), add_noise(img, spec.noise_sigma, scene.rng_trace, &format!("noise/{name}")))?;
    }
    Ok(out)
}

/// Generates `count` scenes; scene `i` uses seed `scene_seed(spec.seed, i)`.
pub fn make_channel_dataset(spec: &SceneSpec, count: usize) -> Result<Vec<FieldOfView>, SynthError> {
    (0..count)
        .map(|i| {
            let s = SceneSpec { seed: scene_seed(spec.seed, i), ..spec.clone() };
            render_channels(&gen_scene(&s)?, &s)
        })
        .collect()
}
