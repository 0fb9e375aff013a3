use super::pgm::quantize;
use super::ImageGrid;

/// 256-bin CDF equalization of the 8-bit quantization of `img`.
///
/// Each level `q` maps to `cdf(q) / N`, so the brightest occupied level
/// always lands on 1.0 and equal inputs stay equal.
pub fn histogram_equalize(img: &ImageGrid) -> ImageGrid {
    let levels: Vec<usize> = img.values().iter().map(|&v| quantize(v, 255) as usize).collect();
    let mut hist = [0usize; 256];
    for &q in &levels {
        hist[q] += 1;
    }
    let n = levels.len() as f64;
    let mut lut = [0.0f64; 256];
    let mut acc = 0usize;
    for (q, count) in hist.iter().enumerate() {
        acc += count;
        lut[q] = acc as f64 / n;
    }
    let values = levels.iter().map(|&q| lut[q]).collect();
    ImageGrid::new(img.width(), img.height(), values)
        .expect("equalized levels lie in (0, 1]")
        .with_bit_depth(img.source_bit_depth())
}
