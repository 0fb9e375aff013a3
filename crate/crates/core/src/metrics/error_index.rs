//! Tolerance-level index of predicted-image error.
//!
//! Both images are quantized to 8 bits and compared through the absolute
//! level difference `e_p`. For every threshold `i` in `0..=252` (99% of the
//! 8-bit range):
//!
//! * `IE(i)`: summed error of pixels with `e_p <= i`, over all pixels,
//!   normalized by 255. Grows with `i`.
//! * `SE(i)`: fraction of pixels with `e_p > i`. Shrinks with `i`.
//!
//! The tolerance level is the minimum of `beta1 * IE + beta2 * SE`.

use std::fmt::{self, Write as _};

use super::{check_dims, MetricsError};
use crate::imgcore::pgm::quantize;
use crate::imgcore::{save_pgm, save_ppm_rgb, BitDepth, ImageGrid};

/// Largest threshold evaluated: `floor(0.99 * 255)`.
pub const MAX_THRESHOLD: u32 = 252;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorIndexMode {
    #[default]
    Plain,
    /// SE divided by the Otsu foreground fraction of the ground truth.
    SignalNormalized,
}

impl fmt::Display for ErrorIndexMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorIndexMode::Plain => "plain",
            ErrorIndexMode::SignalNormalized => "signal_normalized",
        })
    }
}

impl std::str::FromStr for ErrorIndexMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plain" => Ok(Self::Plain),
            "signal_normalized" => Ok(Self::SignalNormalized),
            other => Err(format!("unknown error-index mode `{other}` (plain | signal_normalized)")),
        }
    }
}

/// Denominator for IE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IeScale {
    /// Maximum of the 8-bit range.
    #[default]
    BitDepth,
    /// Mean 8-bit level of the ground truth.
    MeanSignal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorIndexOptions {
    pub beta1: f64,
    pub beta2: f64,
    pub mode: ErrorIndexMode,
    pub ie_scale: IeScale,
}

impl Default for ErrorIndexOptions {
    fn default() -> Self {
        Self { beta1: 1.0, beta2: 1.0, mode: ErrorIndexMode::Plain, ie_scale: IeScale::BitDepth }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorIndexCurve {
    pub thresholds: Vec<u32>,
    pub ie: Vec<f64>,
    pub se: Vec<f64>,
    pub total: Vec<f64>,
    pub tl: f64,
    pub argmin_threshold: u32,
    pub beta1: f64,
    pub beta2: f64,
    pub mode: ErrorIndexMode,
}

impl ErrorIndexCurve {
    /// `threshold,ie,se,total` rows followed by a `# tl=...` footer.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,ie,se,total\n");
        for i in 0..self.thresholds.len() {
            let _ = writeln!(s, "{},{:.12},{:.12},{:.12}", self.thresholds[i], self.ie[i], self.se[i], self.total[i]);
        }
        let _ = writeln!(
            s,
            "# tl={:.12} argmin={} beta1={} beta2={} mode={}",
            self.tl, self.argmin_threshold, self.beta1, self.beta2, self.mode
        );
        s
    }
}

/// Per-pixel `|round(255 pred) - round(255 gt)|`.
pub fn quantized_errors(pred: &ImageGrid, gt: &ImageGrid) -> Result<Vec<u32>, MetricsError> {
    check_dims(pred, gt)?;
    Ok(pred.values().iter().zip(gt.values()).map(|(&p, &g)| quantize(p, 255).abs_diff(quantize(g, 255))).collect())
}

/// Otsu threshold on the 8-bit levels; `None` when fewer than two levels occur.
pub fn otsu_threshold(img: &ImageGrid) -> Option<u32> {
    let mut hist = [0u64; 256];
    for &v in img.values() {
        hist[quantize(v, 255) as usize] += 1;
    }
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let n = img.len() as f64;
    let total_sum: f64 = hist.iter().enumerate().map(|(l, &c)| l as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best = (f64::NEG_INFINITY, 0u32);
    for t in 0..255 {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = n - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let (m0, m1) = (sum0 / w0, (total_sum - sum0) / w1);
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best.0 {
            best = (between, t as u32);
        }
    }
    Some(best.1)
}

pub fn error_index(
    pred: &ImageGrid,
    gt: &ImageGrid,
    beta1: f64,
    beta2: f64,
    mode: ErrorIndexMode,
) -> Result<ErrorIndexCurve, MetricsError> {
    error_index_with(pred, gt, &ErrorIndexOptions { beta1, beta2, mode, ie_scale: IeScale::BitDepth })
}

pub fn error_index_with(
    pred: &ImageGrid,
    gt: &ImageGrid,
    opts: &ErrorIndexOptions,
) -> Result<ErrorIndexCurve, MetricsError> {
    let (beta1, beta2) = (opts.beta1, opts.beta2);
    if !(beta1.is_finite() && beta2.is_finite() && beta1 >= 0.0 && beta2 >= 0.0) {
        return Err(MetricsError::InvalidWeights(beta1, beta2));
    }
    let errors = quantized_errors(pred, gt)?;
    let n = errors.len() as u64;
    let mut hist = [0u64; 256];
    for &e in &errors {
        hist[e as usize] += 1;
    }
    let ie_denominator = match opts.ie_scale {
        IeScale::BitDepth => 255.0 * n as f64,
        IeScale::MeanSignal => {
            let level_sum: u64 = gt.values().iter().map(|&g| u64::from(quantize(g, 255))).sum();
            if level_sum == 0 {
                return Err(MetricsError::EmptyForeground);
            }
            // sum(e) / n / (level_sum / n)
            level_sum as f64
        }
    };
    let se_denominator = match opts.mode {
        ErrorIndexMode::Plain => n as f64,
        ErrorIndexMode::SignalNormalized => {
            let t = otsu_threshold(gt).ok_or(MetricsError::EmptyForeground)?;
            let fg = gt.values().iter().filter(|&&g| quantize(g, 255) > t).count() as u64;
            if fg == 0 {
                return Err(MetricsError::EmptyForeground);
            }
            // count / n / (fg / n)
            fg as f64
        }
    };
    let len = MAX_THRESHOLD as usize + 1;
    let (mut ie, mut se, mut total) = (Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len));
    let mut below_sum = 0u64;
    let mut below_count = 0u64;
    for i in 0..=MAX_THRESHOLD as usize {
        below_sum += i as u64 * hist[i];
        below_count += hist[i];
        let ie_i = below_sum as f64 / ie_denominator;
        let se_i = (n - below_count) as f64 / se_denominator;
        ie.push(ie_i);
        se.push(se_i);
        total.push(beta1 * ie_i + beta2 * se_i);
    }
    let mut arg = 0;
    for (i, &t) in total.iter().enumerate() {
        if t < total[arg] {
            arg = i;
        }
    }
    Ok(ErrorIndexCurve {
        thresholds: (0..=MAX_THRESHOLD).collect(),
        tl: total[arg],
        argmin_threshold: arg as u32,
        ie,
        se,
        total,
        beta1,
        beta2,
        mode: opts.mode,
    })
}

/// Pixels whose 8-bit error exceeds a threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl ErrorMask {
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// 8-bit PGM with set pixels at 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let values = self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let img = ImageGrid::new(self.width, self.height, values).expect("mask raster is valid");
        save_pgm(&img, BitDepth::Eight)
    }

    /// RGB PPM: grayscale `base` with set pixels painted pure green.
    pub fn overlay_ppm(&self, base: &ImageGrid) -> Vec<u8> {
        assert!(base.width() == self.width && base.height() == self.height, "overlay base must match the mask");
        let rgb: Vec<[u8; 3]> = self
            .bits
            .iter()
            .zip(base.values())
            .map(|(&b, &v)| {
                if b {
                    [0, 255, 0]
                } else {
                    let g = quantize(v, 255) as u8;
                    [g, g, g]
                }
            })
            .collect();
        save_ppm_rgb(self.width, self.height, &rgb)
    }
}

pub fn error_mask(pred: &ImageGrid, gt: &ImageGrid, threshold_8bit: u32) -> Result<ErrorMask, MetricsError> {
    if threshold_8bit > 255 {
        return Err(MetricsError::Threshold(threshold_8bit));
    }
    let errors = quantized_errors(pred, gt)?;
    Ok(ErrorMask { width: pred.width(), height: pred.height(), bits: errors.iter().map(|&e| e > threshold_8bit).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn level_image(levels: &[u32], w: usize) -> ImageGrid {
        ImageGrid::new(w, levels.len() / w, levels.iter().map(|&l| f64::from(l) / 255.0).collect()).unwrap()
    }

    /// Exhaustive per-threshold evaluation straight from the definitions.
    fn brute_force(e: &[u32], b1: f64, b2: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64, u32) {
        let n = e.len();
        let (mut ie, mut se, mut tot) = (vec![], vec![], vec![]);
        for i in 0..=252u32 {
            let mut s = 0u64;
            let mut above = 0u64;
            for &v in e {
                if v <= i {
                    s += u64::from(v);
                } else {
                    above += 1;
                }
            }
            let a = s as f64 / (255.0 * n as f64);
            let b = above as f64 / n as f64;
            ie.push(a);
            se.push(b);
            tot.push(b1 * a + b2 * b);
        }
        let mut best = 0;
        for i in 1..tot.len() {
            if tot[i] < tot[best] {
                best = i;
            }
        }
        let tl = tot[best];
        (ie, se, tot, tl, best as u32)
    }

    #[test]
    fn identical_images_have_zero_index() {
        let a = level_image(&[3, 90, 200, 7], 2);
        let c = error_index(&a, &a, 1.0, 1.0, ErrorIndexMode::Plain).unwrap();
        assert!(c.ie.iter().chain(&c.se).all(|&v| v == 0.0));
        assert_eq!((c.tl, c.argmin_threshold), (0.0, 0));
        assert_eq!(c.thresholds.len(), 253);
    }

    #[test]
    fn two_by_two_worked_example() {
        let gt = level_image(&[0, 0, 0, 0], 2);
        let pred = level_image(&[0, 10, 60, 255], 2);
        let c = error_index(&pred, &gt, 1.0, 1.0, ErrorIndexMode::Plain).unwrap();
        assert!((c.ie[50] - 10.0 / 1020.0).abs() < 1e-15);
        assert!((c.ie[50] - 0.009_804).abs() < 1e-6);
        assert_eq!(c.se[50], 0.5);
        assert!((c.total[50] - 0.509_804).abs() < 1e-6);
        let (ie, se, tot, tl, arg) = brute_force(&[0, 10, 60, 255], 1.0, 1.0);
        assert_eq!((c.ie.clone(), c.se.clone(), c.total.clone()), (ie, se, tot));
        assert_eq!((c.tl, c.argmin_threshold), (tl, arg));
        // 0.25 + 0.25 (SE) at i in 10..60 -> IE 10/1020 + SE 0.5; minimum after 60: 70/1020 + 0.25
        assert_eq!(c.argmin_threshold, 60);
    }

    #[test]
    fn degenerate_weights() {
        let gt = level_image(&[0, 0, 0, 0, 0, 0], 3);
        let pred = level_image(&[0, 10, 60, 253, 255, 40], 3);
        // beta = (1, 0): IE is non-decreasing from IE(0) = 0, so TL = 0 at threshold 0.
        let c = error_index(&pred, &gt, 1.0, 0.0, ErrorIndexMode::Plain).unwrap();
        assert_eq!((c.tl, c.argmin_threshold), (0.0, 0));
        // beta = (0, 1): SE bottoms out at the share of errors above 252,
        // first reached at threshold 60 (the largest error <= 252).
        let c = error_index(&pred, &gt, 0.0, 1.0, ErrorIndexMode::Plain).unwrap();
        assert_eq!(c.tl, 2.0 / 6.0);
        assert_eq!(c.argmin_threshold, 60);
        // IE(252) plus the e > 252 mass recovers the full 8-bit MAE
        let full: f64 = [0.0, 10.0, 60.0, 253.0, 255.0, 40.0].iter().sum::<f64>() / (6.0 * 255.0);
        assert!((c.ie[252] + (253.0 + 255.0) / (6.0 * 255.0) - full).abs() < 1e-15);
    }

    #[test]
    fn mask_counts() {
        let gt = level_image(&[0, 0, 0, 0], 2);
        let pred = level_image(&[0, 10, 60, 255], 2);
        assert_eq!(error_mask(&pred, &gt, 50).unwrap().count(), 2);
        assert_eq!(error_mask(&pred, &gt, 255).unwrap().count(), 0);
        assert_eq!(error_mask(&gt, &gt, 0).unwrap().count(), 0);
        assert!(error_mask(&pred, &gt, 256).is_err());
        let m = error_mask(&pred, &gt, 50).unwrap();
        assert_eq!(&m.to_pgm()[11..], &[0, 0, 255, 255]);
        let ppm = m.overlay_ppm(&pred);
        assert_eq!(&ppm[11..], &[0, 0, 0, 10, 10, 10, 0, 255, 0, 0, 255, 0]);
    }

    #[test]
    fn signal_normalized_mode() {
        let gt = level_image(&[0, 0, 200, 200], 2);
        let pred = level_image(&[0, 30, 200, 100], 2);
        let c = error_index(&pred, &gt, 1.0, 1.0, ErrorIndexMode::SignalNormalized).unwrap();
        // Otsu splits {0} | {200}; foreground fraction 1/2 doubles SE
        assert_eq!(c.se[0], 1.0);
        assert_eq!(c.se[50], 0.5);
        let flat = level_image(&[9, 9, 9, 9], 2);
        assert_eq!(
            error_index(&pred, &flat, 1.0, 1.0, ErrorIndexMode::SignalNormalized).unwrap_err(),
            MetricsError::EmptyForeground
        );
    }

    #[test]
    fn mean_signal_ie_scale() {
        let gt = level_image(&[0, 0, 100, 100], 2);
        let pred = level_image(&[10, 0, 100, 100], 2);
        let opts = ErrorIndexOptions { ie_scale: IeScale::MeanSignal, ..Default::default() };
        let c = error_index_with(&pred, &gt, &opts).unwrap();
        // mean error 2.5 levels over mean signal 50 levels
        assert!((c.ie[10] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let gt = level_image(&[0, 0, 0, 0], 2);
        let pred = level_image(&[0, 10, 60, 255], 2);
        let csv = error_index(&pred, &gt, 1.0, 1.0, ErrorIndexMode::Plain).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 253 + 1);
        assert_eq!(lines[0], "threshold,ie,se,total");
        assert_eq!(lines[1], "0,0.000000000000,0.750000000000,0.750000000000");
        assert!(lines[254].starts_with("# tl=0.318627450980 argmin=60 beta1=1 beta2=1 mode=plain"));
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            p in proptest::collection::vec(0u32..=255, 64),
            g in proptest::collection::vec(0u32..=255, 64),
            b1 in 0.0f64..3.0,
            b2 in 0.0f64..3.0,
        ) {
            let pred = level_image(&p, 8);
            let gt = level_image(&g, 8);
            let e: Vec<u32> = p.iter().zip(&g).map(|(a, b)| a.abs_diff(*b)).collect();
            prop_assert_eq!(quantized_errors(&pred, &gt).unwrap(), e.clone());
            let c = error_index(&pred, &gt, b1, b2, ErrorIndexMode::Plain).unwrap();
            let (ie, se, tot, tl, arg) = brute_force(&e, b1, b2);
            prop_assert_eq!(c.ie, ie);
            prop_assert_eq!(c.se, se);
            prop_assert_eq!(c.total, tot);
            prop_assert_eq!(c.tl, tl);
            prop_assert_eq!(c.argmin_threshold, arg);
        }

        #[test]
        fn monotone_and_mask_consistent(
            p in proptest::collection::vec(0.0f64..=1.0, 30),
            g in proptest::collection::vec(0.0f64..=1.0, 30),
        ) {
            let pred = ImageGrid::new(6, 5, p).unwrap();
            let gt = ImageGrid::new(6, 5, g).unwrap();
            let c = error_index(&pred, &gt, 1.0, 1.0, ErrorIndexMode::Plain).unwrap();
            for i in 1..c.ie.len() {
                prop_assert!(c.ie[i] >= c.ie[i - 1]);
                prop_assert!(c.se[i] <= c.se[i - 1]);
            }
            for (i, t) in c.total.iter().enumerate() {
                prop_assert!(c.tl <= *t);
                if i as u32 == c.argmin_threshold { prop_assert_eq!(c.tl, *t); }
            }
            for i in [0u32, 17, 50, 252] {
                let m = error_mask(&pred, &gt, i).unwrap();
                prop_assert_eq!(m.count() as f64 / 30.0, c.se[i as usize]);
            }
        }
    }
}
