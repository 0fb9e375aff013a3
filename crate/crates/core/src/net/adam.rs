use super::{NetError, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 2e-4, beta1: 0.5, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moments per trainable tensor, plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros = params.zero_grads();
        Self { m: zeros.clone(), v: zeros, t: 0 }
    }
}

/// One bias-corrected Adam update. Gradients are checked before anything is
/// modified, so a failure leaves parameters and moments untouched.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &[Vec<f64>],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<(), NetError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(NetError::Shape(format!(
            "{} gradient tensors and {} moment tensors for {} parameters",
            grads.len(),
            state.m.len(),
            params.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.trainable && g.len() != p.values.len() {
            return Err(NetError::Shape(format!("gradient for {} has {} values, expected {}", p.name, g.len(), p.values.len())));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFiniteGradient { param: p.name.clone() });
        }
    }
    state.t += 1;
    let t = state.t as f64;
    let c1 = 1.0 - cfg.beta1.powf(t);
    let c2 = 1.0 - cfg.beta2.powf(t);
    for (i, p) in params.iter_mut().enumerate() {
        if !p.trainable {
            continue;
        }
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (((w, g), m), v) in p.values.iter_mut().zip(&grads[i]).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *w -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.push("w", vec![value], true);
        p
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig { epsilon: 0.0, ..AdamConfig::default() };
        let mut p = single(0.3);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &[vec![1.0]], &mut s, &cfg).unwrap();
        assert!((p.values(0)[0] - (0.3 - 2e-4)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = single(0.7);
        let mut s = AdamState::new(&p);
        for _ in 0..3 {
            adam_step(&mut p, &[vec![0.0]], &mut s, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p.values(0)[0], 0.7);
    }

    #[test]
    fn identical_tensors_get_identical_updates() {
        let mut p = ParamSet::new();
        p.push("a", vec![0.5, -0.1], true);
        p.push("b", vec![0.5, -0.1], true);
        let mut s = AdamState::new(&p);
        let g = vec![vec![0.3, -2.0], vec![0.3, -2.0]];
        for _ in 0..4 {
            adam_step(&mut p, &g, &mut s, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p.values(0), p.values(1));
    }

    #[test]
    fn nan_gradient_names_the_parameter() {
        let mut p = single(1.0);
        let mut s = AdamState::new(&p);
        let err = adam_step(&mut p, &[vec![f64::NAN]], &mut s, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, NetError::NonFiniteGradient { ref param } if param == "w"));
        assert_eq!(p.values(0)[0], 1.0);
        assert_eq!(s.t, 0);
    }
}
