use super::SynthError;
use crate::imgcore::ImageGrid;

/// Isotropic Gaussian defocus with width growing linearly in `|z|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsfModel {
    /// Blur at the focal plane, in pixels.
    pub sigma0: f64,
    /// Pixels of additional blur per micrometre of defocus.
    pub slope: f64,
}

impl Default for PsfModel {
    fn default() -> Self {
        Self { sigma0: 0.0, slope: 0.5 }
    }
}

impl PsfModel {
    pub fn new(sigma0: f64, slope: f64) -> Result<Self, SynthError> {
        let psf = Self { sigma0, slope };
        psf.validate()?;
        Ok(psf)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.sigma0.is_finite() && self.sigma0 >= 0.0) {
            return Err(SynthError::InvalidPsf(format!("sigma0 {} must be finite and >= 0", self.sigma0)));
        }
        if !(self.slope.is_finite() && self.slope > 0.0) {
            return Err(SynthError::InvalidPsf(format!("slope {} must be finite and > 0", self.slope)));
        }
        Ok(())
    }

    pub fn sigma(&self, z_um: f64) -> f64 {
        self.sigma0 + self.slope * z_um.abs()
    }

    /// Kernel radius `ceil(3 sigma)`.
    pub fn radius(&self, z_um: f64) -> usize {
        (3.0 * self.sigma(z_um)).ceil() as usize
    }

    /// Dense `(2r+1)^2` kernel, row-major, summing to one.
    pub fn render_kernel(&self, z_um: f64) -> (usize, Vec<f64>) {
        let k = gaussian_kernel_1d(self.sigma(z_um));
        let side = k.len();
        let mut out = Vec::with_capacity(side * side);
        for a in &k {
            for b in &k {
                out.push(a * b);
            }
        }
        (side, out)
    }
}

/// Normalized 1-D Gaussian taps with radius `ceil(3 sigma)`. `sigma == 0`
/// yields the unit impulse.
pub fn gaussian_kernel_1d(sigma: f64) -> Vec<f64> {
    assert!(sigma.is_finite() && sigma >= 0.0, "sigma must be finite and non-negative");
    let radius = (3.0 * sigma).ceil() as isize;
    if radius == 0 {
        return vec![1.0];
    }
    let mut k: Vec<f64> = (-radius..=radius).map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Mirror index without repeating the edge sample (`d c b | a b c d | c b a`).
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Separable convolution of a row-major raster with a symmetric 1-D kernel
/// applied along both axes, reflect boundary.
pub fn convolve_reflect(values: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; values.len()];
    for row in 0..height {
        let line = &values[row * width..(row + 1) * width];
        for c in 0..width {
            let mut acc = 0.0;
            for (t, k) in kernel.iter().enumerate() {
                acc += k * line[reflect(c as isize + t as isize - r, width)];
            }
            tmp[row * width + c] = acc;
        }
    }
    let mut out = vec![0.0; values.len()];
    for row in 0..height {
        for c in 0..width {
            let mut acc = 0.0;
            for (t, k) in kernel.iter().enumerate() {
                acc += k * tmp[reflect(row as isize + t as isize - r, height) * width + c];
            }
            out[row * width + c] = acc;
        }
    }
    out
}

/// Gaussian blur with reflect padding.
pub fn gaussian_blur(img: &ImageGrid, sigma: f64) -> ImageGrid {
    let k = gaussian_kernel_1d(sigma);
    let out = convolve_reflect(img.values(), img.width(), img.height(), &k);
    ImageGrid::from_clamped(img.width(), img.height(), out)
        .expect("blurred raster keeps its geometry")
        .with_bit_depth(img.source_bit_depth())
}

/// Simulates the image seen `z_um` micrometres away from focus.
pub fn defocus(img: &ImageGrid, z_um: f64, psf: &PsfModel) -> ImageGrid {
    gaussian_blur(img, psf.sigma(z_um))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernels_are_normalized() {
        for s in [0.0, 0.3, 1.0, 1.5, 2.0, 4.7] {
            let k = gaussian_kernel_1d(s);
            assert_eq!(k.len(), 2 * (3.0 * s).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let psf = PsfModel { sigma0: s, slope: 0.5 };
            let (_, k2) = psf.render_kernel(1.0);
            assert!((k2.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn reflect_indexing() {
        let idx: Vec<usize> = (-4..8).map(|i| reflect(i, 4)).collect();
        assert_eq!(idx, vec![2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect(-3, 1), 0);
    }

    #[test]
    fn in_focus_delta_is_identity() {
        let img = ImageGrid::from_fn(7, 5, |r, c| ((r * 7 + c) % 9) as f64 / 8.0).unwrap();
        let psf = PsfModel { sigma0: 0.0, slope: 0.5 };
        assert_eq!(defocus(&img, 0.0, &psf), img);
    }

    #[test]
    fn constant_is_preserved() {
        let img = ImageGrid::filled(16, 12, 0.37).unwrap();
        let out = defocus(&img, -9.0, &PsfModel::default());
        for v in out.values() {
            assert!((v - 0.37).abs() < 1e-9);
        }
    }

    #[test]
    fn impulse_response_is_rendered_kernel() {
        // sigma(z) = 0 + 0.5 * 3 = 1.5 px, radius 5, kernel side 11
        let psf = PsfModel { sigma0: 0.0, slope: 0.5 };
        let (side, kernel) = psf.render_kernel(3.0);
        assert_eq!(side, 11);
        let n = 21;
        let img = ImageGrid::from_fn(n, n, |r, c| if r == 10 && c == 10 { 1.0 } else { 0.0 }).unwrap();
        let out = defocus(&img, 3.0, &psf);
        for r in 0..n {
            for c in 0..n {
                let dr = r as isize - 10;
                let dc = c as isize - 10;
                let expected = if dr.abs() <= 5 && dc.abs() <= 5 {
                    kernel[((dr + 5) as usize) * side + (dc + 5) as usize]
                } else {
                    0.0
                };
                assert!((out.get(r, c) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mean_preserved_for_interior_support() {
        let psf = PsfModel { sigma0: 0.5, slope: 0.5 };
        let img = ImageGrid::from_fn(40, 40, |r, c| {
            if (14..26).contains(&r) && (12..28).contains(&c) { ((r + c) % 5) as f64 / 4.0 } else { 0.0 }
        })
        .unwrap();
        // sigma(4) = 2.5, radius 8; support stays 12 px from the border
        let out = defocus(&img, 4.0, &psf);
        assert!((out.mean() - img.mean()).abs() / img.mean() < 1e-6);
    }

    #[test]
    fn invalid_psf() {
        assert!(PsfModel::new(-1.0, 0.5).is_err());
        assert!(PsfModel::new(0.0, 0.0).is_err());
        assert!(PsfModel::new(0.2, 0.5).is_ok());
    }

    proptest! {
        #[test]
        fn variance_non_increasing_in_defocus(
            vals in proptest::collection::vec(0.0f64..=1.0, 24 * 24),
            z1 in 0.0f64..8.0,
            dz in 0.0f64..4.0,
        ) {
            let img = ImageGrid::new(24, 24, vals).unwrap();
            let psf = PsfModel { sigma0: 0.0, slope: 0.5 };
            let a = defocus(&img, z1, &psf).variance();
            let b = defocus(&img, -(z1 + dz), &psf).variance();
            prop_assert!(b <= a + 1e-12, "var({}) = {a} < var({}) = {b}", z1, z1 + dz);
        }
    }
}
