use rand::Rng;

use super::adam::{adam_step, AdamConfig};
use super::loss::{
    adversarial, adversarial_logit_grad, discriminator_logit_grads, discriminator_loss, reconstruction,
    reconstruction_grad,
};
use super::{
    predict_fov, DiscriminatorConfig, GeneratorConfig, LossWeights, MaeForm, ModelParams, NetError, PairSample, PairSet,
    ParamSet, Tensor,
};
use crate::imgcore::{augment, random_crop, FieldOfView, D4_ORDER};
use crate::metrics;
use crate::rng;
use crate::synthgen::AfSample;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub adversarial: bool,
    pub d_steps_per_g_step: usize,
    /// Side of the square training crops.
    pub patch_side: usize,
    /// Fraction of scenes held out for validation.
    pub val_fraction: f64,
    /// Validation cadence in steps; the last step is always validated.
    pub val_every: usize,
    /// Random D4 transforms on every crop.
    pub augment: bool,
    pub mae_form: MaeForm,
    pub equalize_inputs: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 8,
            steps: 2000,
            seed: 1,
            adversarial: true,
            d_steps_per_g_step: 1,
            patch_side: 32,
            val_fraction: 0.1,
            val_every: 100,
            augment: true,
            mae_form: MaeForm::default(),
            equalize_inputs: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::Config(m.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon.is_finite() && self.adam_epsilon >= 0.0) {
            return bad("adam_epsilon must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.adversarial && self.d_steps_per_g_step == 0 {
            return bad("d_steps_per_g_step must be at least 1 when adversarial training is on");
        }
        if self.val_every == 0 {
            return bad("val_every must be at least 1");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

/// Loss terms of one generator step. Adversarial columns are zero when
/// adversarial training is off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub l_mae: f64,
    pub l_g: f64,
    pub l_theta: f64,
    pub d_loss: f64,
}

/// History as CSV with a header row.
pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from("step,l_mae,l_g,l_theta,d_loss\n");
    for r in rows {
        s.push_str(&format!("{},{:.12e},{:.12e},{:.12e},{:.12e}\n", r.step, r.l_mae, r.l_g, r.l_theta, r.d_loss));
    }
    s
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters with the best validation MAE (initial parameters when no
    /// validation ran).
    pub params: ModelParams,
    pub history: Vec<HistoryRow>,
    /// `(step, mae)` for every validation pass.
    pub validation: Vec<(usize, f64)>,
    pub best_step: Option<usize>,
    pub train_samples: usize,
    pub val_samples: usize,
    /// Pairs rejected while building the dataset.
    pub skipped: usize,
    /// Set when training stopped on a numeric failure; `params` is then the
    /// last good state.
    pub failure: Option<NetError>,
}

impl TrainOutcome {
    pub fn best_val_mae(&self) -> Option<f64> {
        let step = self.best_step?;
        self.validation.iter().find(|(s, _)| *s == step).map(|(_, m)| *m)
    }
}

fn check_finite(v: f64, what: &str, step: usize) -> Result<f64, NetError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NetError::NonFinite { what: what.to_string(), step })
    }
}

/// Mean MAE (unit scale) of tiled predictions over `indices`.
pub fn validation_mae(params: &ModelParams, data: &PairSet, indices: &[usize], tile_side: usize) -> Result<f64, NetError> {
    let mut total = 0.0;
    for &i in indices {
        let s = &data.samples[i];
        let fov = s.to_fov(&data.input_names, &data.target_name)?;
        let pred = predict_fov(params, &fov, tile_side, tile_side / 4)?;
        total += metrics::mae(&pred, &s.target)?;
    }
    Ok(total / indices.len().max(1) as f64)
}

/// Inputs then target under positional names, so a target that repeats an
/// input still gets its own channel.
fn stacked_fov(s: &PairSample) -> Result<FieldOfView, NetError> {
    let mut fov = FieldOfView::new();
    for (i, img) in s.inputs.iter().enumerate() {
        fov.insert(format!("in{i}"), img.clone())?;
    }
    fov.insert("target", s.target.clone())?;
    Ok(fov)
}

struct Batch {
    input: Tensor,
    target: Tensor,
}

fn sample_batch<R: Rng>(data: &PairSet, fovs: &[FieldOfView], train: &[usize], cfg: &TrainConfig, r: &mut R) -> Result<Batch, NetError> {
    let cin = data.input_names.len();
    let side = cfg.patch_side;
    let mut inputs = Vec::with_capacity(cfg.batch_size);
    let mut targets = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.batch_size {
        let idx = train[r.random_range(0..train.len())];
        let (mut patch, _) = random_crop(&fovs[idx], side, r)?;
        if cfg.augment {
            patch = augment(&patch, r.random_range(0..D4_ORDER))?;
        }
        let ch = patch.channels();
        inputs.push(ch[..cin].concat());
        targets.push(ch[cin].clone());
    }
    Ok(Batch { input: Tensor::stack(&inputs, cin, side, side)?, target: Tensor::stack(&targets, 1, side, side)? })
}

fn add_l1_grad(params: &ParamSet, grads: &mut [Vec<f64>], weight: f64) {
    if weight == 0.0 {
        return;
    }
    for (p, g) in params.iter().zip(grads.iter_mut()) {
        if !p.trainable {
            continue;
        }
        for (gv, &w) in g.iter_mut().zip(&p.values) {
            if w > 0.0 {
                *gv += weight;
            } else if w < 0.0 {
                *gv -= weight;
            }
        }
    }
}

/// Trains generator (and optionally discriminator) on paired patches.
pub fn train_cgan(
    data: &PairSet,
    gen_cfg: &GeneratorConfig,
    disc_cfg: &DiscriminatorConfig,
    weights: &LossWeights,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, NetError> {
    cfg.validate()?;
    weights.validate()?;
    if data.is_empty() {
        return Err(NetError::EmptyDataset("no training pairs".into()));
    }
    if gen_cfg.in_channels != data.input_names.len() {
        return Err(NetError::ChannelMismatch {
            expected: gen_cfg.in_channels,
            actual: data.input_names.len(),
            names: data.input_names.clone(),
        });
    }
    gen_cfg.check_side(cfg.patch_side, cfg.patch_side)?;
    let disc_cfg = DiscriminatorConfig { in_channels: gen_cfg.in_channels, side: cfg.patch_side, ..disc_cfg.clone() };
    let mut data = data.clone();
    if cfg.equalize_inputs {
        data.equalize_inputs();
    }
    let mut params = ModelParams::init(gen_cfg.clone(), disc_cfg, data.input_names.clone(), data.target_name.clone(), cfg.seed)?;
    params.equalize_inputs = false;
    let (train, val) = data.split(cfg.seed, cfg.val_fraction);
    let mut outcome = TrainOutcome {
        params: params.clone(),
        history: Vec::with_capacity(cfg.steps),
        validation: Vec::new(),
        best_step: None,
        train_samples: train.len(),
        val_samples: val.len(),
        skipped: data.skipped,
        failure: None,
    };
    if cfg.steps == 0 {
        outcome.params.equalize_inputs = cfg.equalize_inputs;
        return Ok(outcome);
    }
    let fovs = data.samples.iter().map(stacked_fov).collect::<Result<Vec<_>, _>>()?;
    for f in &fovs {
        if f.width() < cfg.patch_side || f.height() < cfg.patch_side {
            return Err(NetError::Config(format!(
                "patch side {} exceeds a {}x{} training image",
                cfg.patch_side,
                f.width(),
                f.height()
            )));
        }
    }
    let generator = params.generator_net()?;
    let discriminator = params.discriminator_net()?;
    let adam = cfg.adam();
    let mut r = rng::stream(cfg.seed, "train/batches");
    let mut best = f64::INFINITY;
    let mut last_good = params.clone();

    for step in 1..=cfg.steps {
        let result = (|| -> Result<HistoryRow, NetError> {
            let batch = sample_batch(&data, &fovs, &train, cfg, &mut r)?;
            let l_theta = params.generator.l1_norm();
            let (pred, gcache) = generator.forward_train(&mut params.generator, &batch.input)?;
            let mut d_loss = 0.0;
            if cfg.adversarial {
                for _ in 0..cfg.d_steps_per_g_step {
                    let (real, rc) = discriminator.forward_train(&mut params.discriminator, &batch.input, &batch.target, true)?;
                    let (fake, fc) = discriminator.forward_train(&mut params.discriminator, &batch.input, &pred, true)?;
                    let sig = |z: &[f64]| z.iter().map(|&v| super::layers::sigmoid(v)).collect::<Vec<_>>();
                    d_loss = check_finite(discriminator_loss(&sig(&real), &sig(&fake))?, "discriminator loss", step)?;
                    let (gr, gf) = discriminator_logit_grads(&real, &fake);
                    let mut dgrads = params.discriminator.zero_grads();
                    discriminator.backward(&params.discriminator, &rc, &gr, &mut dgrads);
                    discriminator.backward(&params.discriminator, &fc, &gf, &mut dgrads);
                    adam_step(&mut params.discriminator, &dgrads, &mut params.discriminator_moments, &adam)?;
                    params.discriminator.snap_f32();
                }
            }
            let l_mae = check_finite(reconstruction(&pred, &batch.target, cfg.mae_form)?, "reconstruction loss", step)?;
            let mut dpred = reconstruction_grad(&pred, &batch.target, cfg.mae_form)?;
            dpred.data_mut().iter_mut().for_each(|v| *v *= weights.lambda1);
            let mut l_g = 0.0;
            if cfg.adversarial {
                let (logits, cache) = discriminator.forward_train(&mut params.discriminator, &batch.input, &pred, false)?;
                let scores: Vec<f64> = logits.iter().map(|&z| super::layers::sigmoid(z)).collect();
                l_g = check_finite(adversarial(&scores), "adversarial loss", step)?;
                let dl: Vec<f64> = adversarial_logit_grad(&logits).iter().map(|g| g * weights.lambda2).collect();
                let mut scratch = params.discriminator.zero_grads();
                dpred.add_assign(&discriminator.backward(&params.discriminator, &cache, &dl, &mut scratch));
            }
            let mut ggrads = params.generator.zero_grads();
            generator.backward(&params.generator, &gcache, &dpred, &mut ggrads);
            add_l1_grad(&params.generator, &mut ggrads, weights.lambda3);
            adam_step(&mut params.generator, &ggrads, &mut params.generator_moments, &adam)?;
            params.generator.snap_f32();
            Ok(HistoryRow { step, l_mae, l_g, l_theta, d_loss })
        })();
        match result {
            Ok(row) => outcome.history.push(row),
            Err(e) => {
                outcome.failure = Some(e);
                break;
            }
        }
        let params_ok = params.generator.iter().chain(params.discriminator.iter()).all(|p| p.values.iter().all(|v| v.is_finite()));
        if !params_ok {
            outcome.failure = Some(NetError::NonFinite { what: "parameters".into(), step });
            break;
        }
        last_good.clone_from(&params);
        if !val.is_empty() && (step % cfg.val_every == 0 || step == cfg.steps) {
            let mae = validation_mae(&params, &data, &val, cfg.patch_side)?;
            outcome.validation.push((step, mae));
            if mae.is_finite() && mae < best {
                best = mae;
                outcome.best_step = Some(step);
                outcome.params.clone_from(&params);
            }
        }
    }
    if outcome.best_step.is_none() {
        outcome.params = last_good;
    }
    outcome.params.equalize_inputs = cfg.equalize_inputs;
    Ok(outcome)
}

/// Refocusing variant: one defocused input channel, near-focus planes skipped.
pub fn train_af(
    samples: &[AfSample],
    gen_cfg: &GeneratorConfig,
    disc_cfg: &DiscriminatorConfig,
    weights: &LossWeights,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, NetError> {
    let data = PairSet::from_af(samples);
    if data.is_empty() {
        return Err(NetError::EmptyDataset(format!(
            "no admissible refocusing pairs ({} near-focus plane(s) skipped)",
            data.skipped
        )));
    }
    if gen_cfg.in_channels != 1 {
        return Err(NetError::Config(format!("refocusing model takes 1 input channel, config has {}", gen_cfg.in_channels)));
    }
    train_cgan(&data, gen_cfg, disc_cfg, weights, cfg)
}
