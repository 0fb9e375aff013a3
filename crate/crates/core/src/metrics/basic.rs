use super::{check_dims, ssim, MetricsError};
use crate::imgcore::ImageGrid;

/// Per-image fidelity scores on the unit-interval intensity scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub mae: f64,
    /// `f64::INFINITY` for identical images.
    pub psnr: f64,
    /// `None` when the image is smaller than the SSIM window.
    pub ssim: Option<f64>,
}

/// Means across a batch of [`MetricReport`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub count: usize,
    pub mean_mae: f64,
    /// Mean over finite entries; `None` when all are infinite.
    pub mean_psnr: Option<f64>,
    pub infinite_psnr: usize,
    pub mean_ssim: Option<f64>,
}

pub fn mae(a: &ImageGrid, b: &ImageGrid) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

pub fn mse(a: &ImageGrid, b: &ImageGrid) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// `10 log10(peak^2 / MSE)`; identical images give `+inf`.
pub fn psnr(a: &ImageGrid, b: &ImageGrid, peak: f64) -> Result<f64, MetricsError> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

fn report(pred: &ImageGrid, gt: &ImageGrid) -> Result<MetricReport, MetricsError> {
    let s = match ssim(pred, gt) {
        Ok(v) => Some(v),
        Err(MetricsError::TooSmall { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricReport { mae: mae(pred, gt)?, psnr: psnr(pred, gt, 1.0)?, ssim: s })
}

/// Scores aligned prediction/ground-truth pairs.
pub fn evaluate_pairs(
    preds: &[ImageGrid],
    gts: &[ImageGrid],
) -> Result<(Vec<MetricReport>, AggregateReport), MetricsError> {
    if preds.len() != gts.len() || preds.is_empty() {
        return Err(MetricsError::ListLength(preds.len(), gts.len()));
    }
    let reports = preds.iter().zip(gts).map(|(p, g)| report(p, g)).collect::<Result<Vec<_>, _>>()?;
    let n = reports.len();
    let finite: Vec<f64> = reports.iter().map(|r| r.psnr).filter(|p| p.is_finite()).collect();
    let ssims: Vec<f64> = reports.iter().filter_map(|r| r.ssim).collect();
    let mean = |v: &[f64]| if v.is_empty() { None } else { Some(v.iter().sum::<f64>() / v.len() as f64) };
    let agg = AggregateReport {
        count: n,
        mean_mae: reports.iter().map(|r| r.mae).sum::<f64>() / n as f64,
        mean_psnr: mean(&finite),
        infinite_psnr: n - finite.len(),
        mean_ssim: mean(&ssims),
    };
    Ok((reports, agg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(v: &[f64]) -> ImageGrid {
        ImageGrid::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn mae_cases() {
        assert_eq!(mae(&img(&[0.2, 0.7]), &img(&[0.2, 0.7])).unwrap(), 0.0);
        assert_eq!(mae(&img(&[0.0; 3]), &img(&[1.0; 3])).unwrap(), 1.0);
        assert!((mae(&img(&[0.0, 0.5]), &img(&[0.1, 0.1])).unwrap() - 0.25).abs() < 1e-15);
        assert!(mae(&img(&[0.0]), &img(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn psnr_cases() {
        assert_eq!(psnr(&img(&[0.3; 4]), &img(&[0.3; 4]), 1.0).unwrap(), f64::INFINITY);
        let a = img(&[0.2; 4]);
        let b = img(&[0.2 + 1.0 / 255.0; 4]);
        assert!((psnr(&a, &b, 1.0).unwrap() - 48.130_803_608_679_1).abs() < 1e-6);
        assert!(psnr(&img(&[0.0; 4]), &img(&[1.0; 4]), 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn aggregate_identical_pairs() {
        let a = ImageGrid::from_fn(12, 12, |r, c| ((r * c) % 7) as f64 / 6.0).unwrap();
        let (reps, agg) = evaluate_pairs(&[a.clone(), a.clone()], &[a.clone(), a]).unwrap();
        assert_eq!(reps.len(), 2);
        assert_eq!(agg.mean_mae, 0.0);
        assert_eq!(agg.mean_ssim, Some(1.0));
        assert_eq!(agg.infinite_psnr, 2);
        assert_eq!(agg.mean_psnr, None);
    }

    #[test]
    fn aggregate_means_and_exclusions() {
        let z = img(&[0.0; 4]);
        let (_, agg) =
            evaluate_pairs(&[img(&[0.1; 4]), img(&[0.3; 4]), z.clone()], &[z.clone(), z.clone(), z.clone()]).unwrap();
        // MAE 0.1, 0.3, 0 -> mean 0.4/3; PSNR 20, 10.4576.., inf -> finite mean over two
        assert!((agg.mean_mae - 0.4 / 3.0).abs() < 1e-15);
        assert_eq!(agg.infinite_psnr, 1);
        let p1 = 10.0 * (1.0f64 / 0.01).log10();
        let p2 = 10.0 * (1.0f64 / 0.09).log10();
        assert!((agg.mean_psnr.unwrap() - (p1 + p2) / 2.0).abs() < 1e-12);
        assert_eq!(agg.mean_ssim, None);
        assert!(evaluate_pairs(std::slice::from_ref(&z), &[]).is_err());
    }
}
