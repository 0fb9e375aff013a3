use super::MetricsError;

/// Sample Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(MetricsError::SeriesLength(x.len(), y.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(MetricsError::UndefinedCorrelation("first"));
    }
    if syy == 0.0 {
        return Err(MetricsError::UndefinedCorrelation("second"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn affine_series() {
        let x = [0.0, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0];
        let up: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let down: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&x, &up).unwrap(), 1.0);
        assert_eq!(pearson(&x, &down).unwrap(), -1.0);
    }

    #[test]
    fn constant_series_is_undefined() {
        assert!(matches!(pearson(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0]), Err(MetricsError::UndefinedCorrelation(_))));
        assert!(matches!(pearson(&[1.0, 2.0], &[3.0, 3.0]), Err(MetricsError::UndefinedCorrelation(_))));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn known_value() {
        // hand computed: x = [1,2,3], y = [1,3,2] -> r = 0.5
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn affine_is_unit_magnitude(
            x in proptest::collection::vec(-100.0f64..100.0, 2..40),
            a in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
            b in -50.0f64..50.0,
        ) {
            let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assume!(spread > 1e-3);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let r = pearson(&x, &y).unwrap();
            prop_assert!((r - a.signum()).abs() < 1e-12, "r = {r}");
        }
    }
}
