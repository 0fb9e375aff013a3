use vstain_core::imgcore::{blend_weight, denormalize, normalize, tile_plan};
use vstain_core::metrics::mae;
use vstain_core::net::{
    generator_loss, predict_fov, predict_patch, read_checkpoint, train_af, train_cgan, write_checkpoint,
    DiscriminatorConfig, GeneratorConfig, LossWeights, MaeForm, ModelParams, NetError, PairSet, Tensor, TrainConfig,
};
use vstain_core::synthgen::{make_af_dataset, make_channel_dataset, AfOptions, NearFocusPolicy, PsfModel, SceneSpec};
use vstain_core::{FieldOfView, ImageGrid};

fn small_scenes(count: usize, side: usize) -> Vec<FieldOfView> {
    let spec = SceneSpec {
        seed: 11,
        width: side,
        height: side,
        nucleus_radius: 3.0..=5.0,
        cell_count: 1..=3,
        ..SceneSpec::default()
    };
    make_channel_dataset(&spec, count).unwrap()
}

fn tiny_generator(in_channels: usize) -> GeneratorConfig {
    GeneratorConfig { in_channels, depth: 1, base_width: 4, ..GeneratorConfig::default() }
}

fn tiny_discriminator() -> DiscriminatorConfig {
    DiscriminatorConfig { base_width: 4, ..DiscriminatorConfig::default() }
}

fn quick_config(steps: usize) -> TrainConfig {
    TrainConfig { steps, batch_size: 2, patch_side: 16, val_every: 2, seed: 5, ..TrainConfig::default() }
}

fn two_channel_set() -> PairSet {
    PairSet::from_scenes(&small_scenes(4, 32), &["nucleus".into(), "membrane".into()], "target").unwrap()
}

#[test]
fn zero_steps_returns_initialized_parameters() {
    let data = two_channel_set();
    let cfg = quick_config(0);
    let out = train_cgan(&data, &tiny_generator(2), &tiny_discriminator(), &LossWeights::default(), &cfg).unwrap();
    assert!(out.history.is_empty());
    assert!(out.validation.is_empty());
    assert!(out.failure.is_none());
    let disc = DiscriminatorConfig { in_channels: 2, side: 16, ..tiny_discriminator() };
    let init = ModelParams::init(tiny_generator(2), disc, data.input_names.clone(), "target".into(), cfg.seed).unwrap();
    assert_eq!(out.params.generator, init.generator);
    assert_eq!(out.params.discriminator, init.discriminator);
}

#[test]
fn history_has_one_row_per_step_and_is_reproducible() {
    let data = two_channel_set();
    let cfg = quick_config(5);
    let run = || train_cgan(&data, &tiny_generator(2), &tiny_discriminator(), &LossWeights::default(), &cfg).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.history.len(), 5);
    assert_eq!(a.history.iter().map(|r| r.step).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    assert_eq!(a.history, b.history);
    assert_eq!(a.validation, b.validation);
    assert_eq!(a.params.generator, b.params.generator);
    assert!(a.history.iter().all(|r| r.d_loss.is_finite() && r.d_loss > 0.0));
    // Validation runs every other step and at the final step.
    assert_eq!(a.validation.iter().map(|v| v.0).collect::<Vec<_>>(), vec![2, 4, 5]);
}

#[test]
fn different_seeds_diverge() {
    let data = two_channel_set();
    let a = train_cgan(&data, &tiny_generator(2), &tiny_discriminator(), &LossWeights::default(), &quick_config(2));
    let b = train_cgan(
        &data,
        &tiny_generator(2),
        &tiny_discriminator(),
        &LossWeights::default(),
        &TrainConfig { seed: 6, ..quick_config(2) },
    );
    assert_ne!(a.unwrap().history, b.unwrap().history);
}

#[test]
fn checkpoint_round_trip_preserves_predictions_bit_for_bit() {
    let data = two_channel_set();
    let out = train_cgan(&data, &tiny_generator(2), &tiny_discriminator(), &LossWeights::default(), &quick_config(3)).unwrap();
    let bytes = write_checkpoint(&out.params);
    let back = read_checkpoint(&bytes).unwrap();
    assert_eq!(write_checkpoint(&back), bytes);
    let fov = data.samples[0].to_fov(&data.input_names, &data.target_name).unwrap();
    let a = predict_fov(&out.params, &fov, 16, 4).unwrap();
    let b = predict_fov(&back, &fov, 16, 4).unwrap();
    assert_eq!(a.values(), b.values());
}

#[test]
fn channel_count_mismatch_is_reported() {
    let data = PairSet::from_scenes(&small_scenes(2, 32), &["nucleus".into()], "target").unwrap();
    let err = train_cgan(&data, &tiny_generator(2), &tiny_discriminator(), &LossWeights::default(), &quick_config(1));
    assert!(matches!(err, Err(NetError::ChannelMismatch { expected: 2, actual: 1, .. })));

    let params = ModelParams::init(
        tiny_generator(2),
        DiscriminatorConfig { in_channels: 2, side: 16, ..tiny_discriminator() },
        vec!["nucleus".into(), "membrane".into()],
        "target".into(),
        1,
    )
    .unwrap();
    let fov = small_scenes(1, 32)[0].select(&["nucleus".to_string()]).unwrap();
    match predict_fov(&params, &fov, 16, 4) {
        Err(NetError::ChannelMismatch { expected, actual, .. }) => assert_eq!((expected, actual), (2, 1)),
        other => panic!("expected a channel mismatch, got {other:?}"),
    }
}

fn fresh_params(in_channels: usize) -> ModelParams {
    let names: Vec<String> = (0..in_channels).map(|i| format!("c{i}")).collect();
    ModelParams::init(
        tiny_generator(in_channels),
        DiscriminatorConfig { in_channels, side: 16, ..tiny_discriminator() },
        names,
        "t".into(),
        3,
    )
    .unwrap()
}

fn random_fov(width: usize, height: usize, seed: u64) -> FieldOfView {
    let mut state = seed;
    let img = ImageGrid::from_fn(width, height, |_, _| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    })
    .unwrap();
    FieldOfView::new().with("c0", img).unwrap()
}

#[test]
fn single_tile_prediction_equals_direct_inference() {
    let params = fresh_params(1);
    let fov = random_fov(16, 16, 9);
    let stitched = predict_fov(&params, &fov, 16, 4).unwrap();
    let x = Tensor::from_vec([1, 1, 16, 16], normalize(fov.get("c0").unwrap())).unwrap();
    let y = predict_patch(&params, &x).unwrap();
    let direct = denormalize(16, 16, y.item(0)).unwrap();
    assert_eq!(stitched.values(), direct.values());
}

#[test]
fn overlapping_tiles_match_the_weighted_blend_oracle() {
    let params = fresh_params(1);
    let (w, h, side, overlap) = (40, 28, 16, 5);
    let fov = random_fov(w, h, 4);
    let stitched = predict_fov(&params, &fov, side, overlap).unwrap();
    let layout = tile_plan(w, h, side, overlap).unwrap();
    let src = fov.get("c0").unwrap();
    let mut acc = vec![0.0; w * h];
    let mut norm = vec![0.0; w * h];
    for &(r0, c0) in &layout.origins {
        let crop = src.crop(r0, c0, side, side).unwrap();
        let x = Tensor::from_vec([1, 1, side, side], normalize(&crop)).unwrap();
        let tile = denormalize(side, side, predict_patch(&params, &x).unwrap().item(0)).unwrap();
        for r in 0..side {
            for c in 0..side {
                let wt = blend_weight(r, c, side, overlap);
                acc[(r0 + r) * w + c0 + c] += wt * tile.get(r, c);
                norm[(r0 + r) * w + c0 + c] += wt;
            }
        }
    }
    for i in 0..w * h {
        let expected = acc[i] / norm[i];
        assert!((stitched.values()[i] - expected).abs() < 1e-9, "pixel {i}: {} vs {expected}", stitched.values()[i]);
    }
}

#[test]
fn constant_generator_yields_constant_image() {
    let mut params = fresh_params(1);
    let (w_idx, b_idx) = {
        let names: Vec<&str> = params.generator.iter().map(|p| p.name.as_str()).collect();
        (names.iter().position(|n| *n == "g.out.w").unwrap(), names.iter().position(|n| *n == "g.out.b").unwrap())
    };
    params.generator.values_mut(w_idx).iter_mut().for_each(|v| *v = 0.0);
    params.generator.values_mut(b_idx)[0] = 0.5;
    let out = predict_fov(&params, &random_fov(37, 29, 2), 16, 4).unwrap();
    let expected = (0.5f64.tanh() + 1.0) / 2.0;
    assert!(out.values().iter().all(|v| (v - expected).abs() < 1e-12));
    assert_eq!((out.width(), out.height()), (37, 29));
}

#[test]
fn unit_reconstruction_weight_is_plain_mae() {
    let mut state = 17u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let pred = Tensor::from_vec([2, 1, 8, 8], (0..128).map(|_| next()).collect()).unwrap();
    let target = Tensor::from_vec([2, 1, 8, 8], (0..128).map(|_| next()).collect()).unwrap();
    let w = LossWeights { lambda1: 1.0, lambda2: 0.0, lambda3: 0.0 };
    let loss = generator_loss(&pred, &target, &[0.3, 0.9], 123.0, &w, MaeForm::Signed).unwrap();
    let unit = |t: &Tensor| denormalize(8, 16, t.data()).unwrap();
    let reference = mae(&unit(&pred), &unit(&target)).unwrap();
    // [-1, 1] space is twice as wide as the unit interval.
    assert!((loss.total - 2.0 * reference).abs() < 1e-12);
}

#[test]
fn refocusing_requires_admissible_pairs() {
    let spec = SceneSpec { seed: 2, width: 32, height: 32, nucleus_radius: 3.0..=5.0, ..SceneSpec::default() };
    let opts = AfOptions { scenes: 2, policy: NearFocusPolicy::Flag, ..AfOptions::default() };
    let flagged = make_af_dataset(&spec, &[-1.0, 2.0], &PsfModel::default(), &opts).unwrap();
    let gcfg = tiny_generator(1);
    match train_af(&flagged.samples, &gcfg, &tiny_discriminator(), &LossWeights::default(), &quick_config(1)) {
        Err(NetError::EmptyDataset(msg)) => assert!(msg.contains("4 near-focus")),
        other => panic!("expected an empty-dataset error, got {other:?}"),
    }
    let mixed = make_af_dataset(&spec, &[-6.0, 1.0, 4.0], &PsfModel::default(), &opts).unwrap();
    let out = train_af(&mixed.samples, &gcfg, &tiny_discriminator(), &LossWeights::default(), &quick_config(1)).unwrap();
    assert_eq!(out.skipped, 2);
    assert_eq!(out.train_samples + out.val_samples, 4);
    assert!(train_af(&mixed.samples, &tiny_generator(2), &tiny_discriminator(), &LossWeights::default(), &quick_config(1))
        .is_err());
}

#[test]
fn identity_task_learns_to_copy() {
    let spec = SceneSpec { seed: 7, ..SceneSpec::default() };
    let scenes = make_channel_dataset(&spec, 20).unwrap();
    let data = PairSet::from_scenes(&scenes, &["nucleus".into()], "nucleus").unwrap();
    let gcfg = GeneratorConfig { in_channels: 1, depth: 2, ..GeneratorConfig::default() };
    let cfg = TrainConfig { steps: 2000, adversarial: false, val_every: 250, seed: 7, ..TrainConfig::default() };
    let out = train_cgan(&data, &gcfg, &DiscriminatorConfig::default(), &LossWeights::default(), &cfg).unwrap();
    let best = out.best_val_mae().unwrap();
    let last = out.validation.last().unwrap().1;
    eprintln!("identity: best validation MAE {best:.4}, last {last:.4}");
    assert!(last < 0.02, "final validation MAE {last}");
}

#[test]
fn single_plane_refocusing_beats_the_input_baseline() {
    let spec = SceneSpec { seed: 4, ..SceneSpec::default() };
    let psf = PsfModel { sigma0: 0.0, slope: 0.5 };
    let af = make_af_dataset(&spec, &[6.0], &psf, &AfOptions { scenes: 10, ..AfOptions::default() }).unwrap();
    let gcfg = GeneratorConfig { in_channels: 1, depth: 2, ..GeneratorConfig::default() };
    let cfg = TrainConfig { steps: 600, val_every: 600, adversarial: false, seed: 4, ..TrainConfig::default() };
    let out = train_af(&af.samples, &gcfg, &DiscriminatorConfig::default(), &LossWeights::default(), &cfg).unwrap();
    let data = PairSet::from_af(&af.samples);
    let (_, val) = data.split(cfg.seed, cfg.val_fraction);
    let (mut baseline, mut learned) = (0.0, 0.0);
    for &i in &val {
        let s = &data.samples[i];
        let fov = s.to_fov(&data.input_names, &data.target_name).unwrap();
        let pred = predict_fov(&out.params, &fov, 32, 8).unwrap();
        baseline += mae(&s.inputs[0], &s.target).unwrap();
        learned += mae(&pred, &s.target).unwrap();
    }
    let n = val.len() as f64;
    eprintln!("z=6: input MAE {:.4}, predicted MAE {:.4}", baseline / n, learned / n);
    assert!(learned < baseline);
}
