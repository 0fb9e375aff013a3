use std::ops::RangeInclusive;

use rand::Rng;

use super::SynthError;
use crate::rng;

/// Parameters of a synthetic cell scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub cell_count: RangeInclusive<usize>,
    pub nucleus_radius: RangeInclusive<f64>,
    pub filament_count: RangeInclusive<usize>,
    pub noise_sigma: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            width: 64,
            height: 64,
            cell_count: 2..=5,
            nucleus_radius: 4.0..=7.0,
            filament_count: 2..=5,
            noise_sigma: 0.01,
        }
    }
}

/// Width of the membrane ring profile, in pixels.
pub(crate) const RING_SIGMA: f64 = 1.0;
const RING_REACH: f64 = 3.0 * RING_SIGMA;
const FILAMENT_THICKNESS: RangeInclusive<f64> = 0.6..=1.2;
const FILAMENT_POINTS: usize = 3;

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("raster {}x{} is empty", self.width, self.height));
        }
        if self.cell_count.is_empty() {
            return bad(format!("cell_count range {:?} is empty", self.cell_count));
        }
        if self.filament_count.is_empty() {
            return bad(format!("filament_count range {:?} is empty", self.filament_count));
        }
        let (rmin, rmax) = (*self.nucleus_radius.start(), *self.nucleus_radius.end());
        if !(rmin.is_finite() && rmax.is_finite() && rmin > 0.0 && rmin <= rmax) {
            return bad(format!("nucleus_radius range {rmin}..={rmax} must be positive and non-empty"));
        }
        if !(self.noise_sigma.is_finite() && (0.0..0.2).contains(&self.noise_sigma)) {
            return bad(format!("noise_sigma {} must lie in [0, 0.2)", self.noise_sigma));
        }
        let half = self.width.min(self.height) as f64 / 2.0;
        if *self.cell_count.end() > 0 && rmax + RING_REACH >= half {
            return Err(SynthError::Infeasible(format!(
                "nucleus radius {rmax} plus ring does not fit within half-width {half}"
            )));
        }
        if *self.filament_count.end() > 0 && 3.0 * FILAMENT_THICKNESS.end() + 1.0 >= half {
            return Err(SynthError::Infeasible(format!("raster too small for filaments (half-width {half})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nucleus {
    /// `(row, col)` in pixel coordinates.
    pub center: (f64, f64),
    pub radius: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filament {
    pub points: Vec<(f64, f64)>,
    pub thickness: f64,
    pub intensity: f64,
}

/// Geometry of one synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct CellScene {
    pub width: usize,
    pub height: usize,
    pub nuclei: Vec<Nucleus>,
    pub filaments: Vec<Filament>,
    /// Seed the scene was drawn with.
    pub rng_trace: u64,
}

/// Seed for scene `index` of a dataset rooted at `seed`.
pub fn scene_seed(seed: u64, index: usize) -> u64 {
    rng::stream(seed, &format!("scene/{index}")).random()
}

fn uniform_point<R: Rng>(rng: &mut R, width: usize, height: usize, margin: f64) -> (f64, f64) {
    let hi_r = height as f64 - 1.0 - margin;
    let hi_c = width as f64 - 1.0 - margin;
    (rng.random_range(margin..=hi_r), rng.random_range(margin..=hi_c))
}

/// Draws a scene. Every primitive is placed uniformly over the positions
/// that keep its full footprint inside the raster.
pub fn gen_scene(spec: &SceneSpec) -> Result<CellScene, SynthError> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, "scene");
    let n_cells = rng.random_range(spec.cell_count.clone());
    let mut nuclei = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let radius = rng.random_range(spec.nucleus_radius.clone());
        let center = uniform_point(&mut rng, spec.width, spec.height, radius + RING_REACH);
        let intensity = rng.random_range(0.5..=1.0);
        nuclei.push(Nucleus { center, radius, intensity });
    }
    let n_fil = rng.random_range(spec.filament_count.clone());
    let mut filaments = Vec::with_capacity(n_fil);
    for _ in 0..n_fil {
        let thickness = rng.random_range(FILAMENT_THICKNESS);
        let intensity = rng.random_range(0.4..=0.9);
        let margin = 3.0 * thickness + 1.0;
        let points = (0..FILAMENT_POINTS).map(|_| uniform_point(&mut rng, spec.width, spec.height, margin)).collect();
        filaments.push(Filament { points, thickness, intensity });
    }
    Ok(CellScene { width: spec.width, height: spec.height, nuclei, filaments, rng_trace: spec.seed })
}
