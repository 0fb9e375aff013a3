use std::fmt;
use std::str::FromStr;

use super::layers::sigmoid;
use super::{NetError, Tensor};

/// Scores are clamped to `[SCORE_EPS, 1 - SCORE_EPS]` before taking logs.
pub const SCORE_EPS: f64 = 1e-12;

/// Weights of the reconstruction, adversarial and parameter-norm terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda1: 0.99, lambda2: 0.01, lambda3: 0.001 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), NetError> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(NetError::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// How the reconstruction term compares prediction and target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaeForm {
    /// `| |target| - |pred| |`, magnitudes in [-1, 1] space.
    Magnitude,
    /// `| target - pred |`.
    #[default]
    Signed,
}

impl fmt::Display for MaeForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaeForm::Magnitude => "magnitude",
            MaeForm::Signed => "signed",
        })
    }
}

impl FromStr for MaeForm {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "magnitude" => Ok(MaeForm::Magnitude),
            "signed" => Ok(MaeForm::Signed),
            other => Err(NetError::Config(format!("unknown MAE form {other:?} (expected magnitude or signed)"))),
        }
    }
}

/// Unweighted terms and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub mae: f64,
    pub adversarial: f64,
    pub theta: f64,
}

fn clamp_score(s: f64) -> f64 {
    s.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
}

fn check_pair(pred: &Tensor, target: &Tensor) -> Result<(), NetError> {
    if pred.shape() != target.shape() {
        return Err(NetError::Shape(format!("prediction {:?} vs target {:?}", pred.shape(), target.shape())));
    }
    Ok(())
}

/// Per-item mean absolute difference, averaged over the batch.
pub fn reconstruction(pred: &Tensor, target: &Tensor, form: MaeForm) -> Result<f64, NetError> {
    check_pair(pred, target)?;
    let total: f64 = match form {
        MaeForm::Signed => pred.data().iter().zip(target.data()).map(|(p, t)| (t - p).abs()).sum(),
        MaeForm::Magnitude => pred.data().iter().zip(target.data()).map(|(p, t)| (t.abs() - p.abs()).abs()).sum(),
    };
    Ok(total / pred.data().len() as f64)
}

/// Gradient of [`reconstruction`] with respect to `pred`.
pub fn reconstruction_grad(pred: &Tensor, target: &Tensor, form: MaeForm) -> Result<Tensor, NetError> {
    check_pair(pred, target)?;
    let n = pred.data().len() as f64;
    let sign = |v: f64| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| match form {
            MaeForm::Signed => sign(p - t) / n,
            MaeForm::Magnitude => sign(p.abs() - t.abs()) * sign(p) / n,
        })
        .collect();
    Tensor::from_vec(pred.shape(), data)
}

/// `-log d` averaged over the batch, with `d` floored at [`SCORE_EPS`].
pub fn adversarial(d_scores: &[f64]) -> f64 {
    if d_scores.is_empty() {
        return 0.0;
    }
    d_scores.iter().map(|&s| -s.max(SCORE_EPS).ln()).sum::<f64>() / d_scores.len() as f64
}

/// Gradient of [`adversarial`] with respect to the discriminator logits.
pub fn adversarial_logit_grad(logits: &[f64]) -> Vec<f64> {
    let n = logits.len() as f64;
    logits.iter().map(|&z| (sigmoid(z) - 1.0) / n).collect()
}

/// `λ1·l_MAE + λ2·l_G + λ3·‖θ_G‖₁`.
pub fn generator_loss(
    pred: &Tensor,
    target: &Tensor,
    d_scores: &[f64],
    theta_l1: f64,
    weights: &LossWeights,
    form: MaeForm,
) -> Result<LossBreakdown, NetError> {
    if !d_scores.is_empty() && d_scores.len() != pred.batch() {
        return Err(NetError::Shape(format!("{} scores for a batch of {}", d_scores.len(), pred.batch())));
    }
    let mae = reconstruction(pred, target, form)?;
    let adv = adversarial(d_scores);
    let total = weights.lambda1 * mae + weights.lambda2 * adv + weights.lambda3 * theta_l1;
    Ok(LossBreakdown { total, mae, adversarial: adv, theta: theta_l1 })
}

/// `-[log d_real + log(1 - d_fake)]` averaged over the batch.
pub fn discriminator_loss(d_real: &[f64], d_fake: &[f64]) -> Result<f64, NetError> {
    if d_real.len() != d_fake.len() || d_real.is_empty() {
        return Err(NetError::Shape(format!("{} real and {} fake scores", d_real.len(), d_fake.len())));
    }
    let sum: f64 = d_real
        .iter()
        .zip(d_fake)
        .map(|(&r, &f)| -(clamp_score(r).ln() + (1.0 - clamp_score(f)).ln()))
        .sum();
    Ok(sum / d_real.len() as f64)
}

/// Logit gradients of [`discriminator_loss`] for the real and fake halves.
pub fn discriminator_logit_grads(real: &[f64], fake: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = real.len() as f64;
    (
        real.iter().map(|&z| (sigmoid(z) - 1.0) / n).collect(),
        fake.iter().map(|&z| sigmoid(z) / n).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: Vec<f64>) -> Tensor {
        Tensor::from_vec([1, 1, 1, v.len()], v).unwrap()
    }

    #[test]
    fn hand_computed_total() {
        let pred = t(vec![0.1, 0.3, -0.5, 0.7]);
        let target = t(vec![0.2, 0.2, -0.6, 0.8]);
        let l = generator_loss(&pred, &target, &[0.5], 10.0, &LossWeights::default(), MaeForm::Signed).unwrap();
        let want = 0.99 * 0.1 + 0.01 * std::f64::consts::LN_2 + 0.001 * 10.0;
        assert!((l.total - want).abs() < 1e-9);
        let m = generator_loss(&pred, &target, &[0.5], 10.0, &LossWeights::default(), MaeForm::Magnitude).unwrap();
        assert!((m.total - want).abs() < 1e-9);
    }

    #[test]
    fn vanishes_at_optimum() {
        let x = t(vec![0.2, -0.4]);
        let l = generator_loss(&x, &x, &[1.0], 0.0, &LossWeights::default(), MaeForm::Magnitude).unwrap();
        assert_eq!(l.total, 0.0);
    }

    #[test]
    fn magnitude_form_ignores_sign() {
        let a = t(vec![0.5]);
        let b = t(vec![-0.5]);
        assert_eq!(reconstruction(&a, &b, MaeForm::Magnitude).unwrap(), 0.0);
        assert_eq!(reconstruction(&a, &b, MaeForm::Signed).unwrap(), 1.0);
    }

    #[test]
    fn discriminator_loss_values() {
        assert!((discriminator_loss(&[0.5], &[0.5]).unwrap() - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!(discriminator_loss(&[1.0 - SCORE_EPS], &[SCORE_EPS]).unwrap() < 1e-11);
        let saturated = discriminator_loss(&[0.0], &[0.5]).unwrap();
        assert!(saturated >= -SCORE_EPS.ln() && saturated.is_finite());
    }

    #[test]
    fn adversarial_terms_are_non_negative() {
        for s in [0.0, 1e-20, 0.3, 1.0] {
            assert!(adversarial(&[s]) >= 0.0);
            assert!(discriminator_loss(&[s], &[s]).unwrap() >= 0.0);
        }
    }

    #[test]
    fn form_parses() {
        assert_eq!("signed".parse::<MaeForm>().unwrap(), MaeForm::Signed);
        assert_eq!(MaeForm::Magnitude.to_string().parse::<MaeForm>().unwrap(), MaeForm::Magnitude);
        assert!("l2".parse::<MaeForm>().is_err());
    }
}
