//! `[section]` / `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;
use vstain_core::metrics::ErrorIndexMode;
use vstain_core::net::{DiscriminatorConfig, GeneratorConfig, LossWeights, MaeForm, TrainConfig};
use vstain_core::synthgen::{PsfModel, SceneSpec};
use vstain_core::BitDepth;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("[{section}] {key} = {value:?}: {msg}")]
    Value { section: String, key: String, value: String, msg: String },
}

/// Recognized keys with their defaults, in echo order.
const SCHEMA: &[(&str, &[(&str, &str)])] = &[
    ("", &[("seed", "1")]),
    (
        "scene",
        &[
            ("scenes", "20"),
            ("width", "64"),
            ("height", "64"),
            ("cell_count_min", "2"),
            ("cell_count_max", "5"),
            ("nucleus_radius_min", "4"),
            ("nucleus_radius_max", "7"),
            ("filament_count_min", "2"),
            ("filament_count_max", "5"),
            ("noise_sigma", "0.01"),
            ("bit_depth", "16"),
            ("af", "false"),
            ("af_scenes", "auto"),
            ("af_channel", "membrane"),
            ("z_values", "-8,-6,-4,4,6,8"),
        ],
    ),
    ("psf", &[("sigma0", "0"), ("slope", "0.5")]),
    (
        "generator",
        &[
            ("inputs", "nucleus,membrane"),
            ("target", "target"),
            ("out_channels", "1"),
            ("depth", "3"),
            ("base_width", "16"),
            ("kernel", "3"),
            ("leaky_slope", "0.2"),
        ],
    ),
    ("discriminator", &[("base_width", "16"), ("kernel", "5"), ("block_count", "3"), ("leaky_slope", "0.2")]),
    ("loss", &[("lambda1", "0.99"), ("lambda2", "0.01"), ("lambda3", "0.001"), ("mae_form", "signed")]),
    (
        "train",
        &[
            ("learning_rate", "0.0002"),
            ("adam_beta1", "0.5"),
            ("adam_beta2", "0.999"),
            ("adam_epsilon", "0.00000001"),
            ("batch_size", "8"),
            ("steps", "2000"),
            ("adversarial", "auto"),
            ("d_steps_per_g_step", "1"),
            ("patch_side", "32"),
            ("val_fraction", "0.1"),
            ("val_every", "100"),
            ("augment", "true"),
            ("equalize_inputs", "false"),
        ],
    ),
    (
        "eval",
        &[
            ("beta1", "1"),
            ("beta2", "1"),
            ("mode", "plain"),
            ("mask_threshold", "50"),
            ("tile_side", "auto"),
            ("overlap", "auto"),
        ],
    ),
];

/// Raw values after defaults, keyed by `(section, key)`.
#[derive(Debug, Clone)]
struct Raw(BTreeMap<(String, String), String>);

impl Raw {
    fn get(&self, section: &str, key: &str) -> &str {
        self.0.get(&(section.to_string(), key.to_string())).map(String::as_str).expect("schema key")
    }

    fn parse<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(section, key);
        raw.parse::<T>().map_err(|e| value_err(section, key, raw, e.to_string()))
    }

    fn auto<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if self.get(section, key) == "auto" {
            Ok(None)
        } else {
            self.parse(section, key).map(Some)
        }
    }

    fn list_f64(&self, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.get(section, key);
        raw.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| value_err(section, key, raw, e.to_string())))
            .collect()
    }

    fn list_str(&self, section: &str, key: &str) -> Vec<String> {
        self.get(section, key).split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    }
}

fn value_err(section: &str, key: &str, value: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value { section: section.into(), key: key.into(), value: value.into(), msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Cgan,
    Af,
}

/// Scene synthesis settings.
#[derive(Debug, Clone)]
pub struct SceneSection {
    pub spec: SceneSpec,
    pub scenes: usize,
    pub bit_depth: BitDepth,
    pub af: bool,
    pub af_scenes: usize,
    pub af_channel: String,
    pub z_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EvalSection {
    pub beta1: f64,
    pub beta2: f64,
    pub mode: ErrorIndexMode,
    pub mask_threshold: u32,
    pub tile_side: Option<usize>,
    pub overlap: Option<usize>,
}

/// Fully typed configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub scene: SceneSection,
    pub psf: PsfModel,
    pub inputs: Vec<String>,
    pub target: String,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub loss: LossWeights,
    pub train: TrainConfig,
    /// `None` means "on for cgan, off for af".
    pub adversarial: Option<bool>,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::parse("").expect("defaults are valid")
    }
}

fn check<T>(r: Result<T, impl std::fmt::Display>, section: &str, key: &str, value: String) -> Result<T, ConfigError> {
    r.map_err(|e| value_err(section, key, &value, e.to_string()))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = BTreeMap::new();
        for (section, keys) in SCHEMA {
            for (k, v) in *keys {
                raw.insert((section.to_string(), k.to_string()), v.to_string());
            }
        }
        let mut section = String::new();
        let mut seen = std::collections::BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: "unterminated section header".into() })?
                    .trim();
                if !SCHEMA.iter().any(|(s, _)| *s == name && !name.is_empty()) {
                    return Err(ConfigError::UnknownSection(name.to_string()));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: "expected `key = value`".into() })?;
            let (k, v) = (k.trim(), v.trim());
            let key = (section.clone(), k.to_string());
            if !raw.contains_key(&key) {
                return Err(ConfigError::UnknownKey { section: section.clone(), key: k.to_string() });
            }
            if !seen.insert(key.clone()) {
                return Err(ConfigError::Syntax { line: i + 1, msg: format!("duplicate key `{k}`") });
            }
            raw.insert(key, v.to_string());
        }
        Self::from_raw(&Raw(raw))
    }

    fn from_raw(r: &Raw) -> Result<Self, ConfigError> {
        let seed: u64 = r.parse("", "seed")?;
        let spec = SceneSpec {
            seed,
            width: r.parse("scene", "width")?,
            height: r.parse("scene", "height")?,
            cell_count: r.parse("scene", "cell_count_min")?..=r.parse("scene", "cell_count_max")?,
            nucleus_radius: r.parse("scene", "nucleus_radius_min")?..=r.parse("scene", "nucleus_radius_max")?,
            filament_count: r.parse("scene", "filament_count_min")?..=r.parse("scene", "filament_count_max")?,
            noise_sigma: r.parse("scene", "noise_sigma")?,
        };
        check(spec.validate(), "scene", "width", format!("{}x{}", spec.width, spec.height))?;
        let bits: u32 = r.parse("scene", "bit_depth")?;
        let bit_depth = BitDepth::from_bits(bits)
            .ok_or_else(|| value_err("scene", "bit_depth", &bits.to_string(), "expected 8 or 16"))?;
        let scenes: usize = r.parse("scene", "scenes")?;
        let scene = SceneSection {
            spec,
            scenes,
            bit_depth,
            af: r.parse("scene", "af")?,
            af_scenes: r.auto("scene", "af_scenes")?.unwrap_or(scenes),
            af_channel: r.parse("scene", "af_channel")?,
            z_values: r.list_f64("scene", "z_values")?,
        };
        let psf = PsfModel { sigma0: r.parse("psf", "sigma0")?, slope: r.parse("psf", "slope")? };
        check(psf.validate(), "psf", "slope", psf.slope.to_string())?;
        let inputs = r.list_str("generator", "inputs");
        let target: String = r.parse("generator", "target")?;
        let generator = GeneratorConfig {
            in_channels: inputs.len(),
            out_channels: r.parse("generator", "out_channels")?,
            depth: r.parse("generator", "depth")?,
            base_width: r.parse("generator", "base_width")?,
            kernel: r.parse("generator", "kernel")?,
            leaky_slope: r.parse("generator", "leaky_slope")?,
        };
        check(generator.validate(), "generator", "inputs", r.get("generator", "inputs").to_string())?;
        let patch_side: usize = r.parse("train", "patch_side")?;
        let discriminator = DiscriminatorConfig {
            in_channels: inputs.len(),
            side: patch_side,
            base_width: r.parse("discriminator", "base_width")?,
            kernel: r.parse("discriminator", "kernel")?,
            block_count: r.parse("discriminator", "block_count")?,
            leaky_slope: r.parse("discriminator", "leaky_slope")?,
        };
        check(discriminator.validate(), "discriminator", "base_width", discriminator.base_width.to_string())?;
        let loss = LossWeights {
            lambda1: r.parse("loss", "lambda1")?,
            lambda2: r.parse("loss", "lambda2")?,
            lambda3: r.parse("loss", "lambda3")?,
        };
        check(loss.validate(), "loss", "lambda1", String::new())?;
        let adversarial: Option<bool> = r.auto("train", "adversarial")?;
        let train = TrainConfig {
            learning_rate: r.parse("train", "learning_rate")?,
            adam_beta1: r.parse("train", "adam_beta1")?,
            adam_beta2: r.parse("train", "adam_beta2")?,
            adam_epsilon: r.parse("train", "adam_epsilon")?,
            batch_size: r.parse("train", "batch_size")?,
            steps: r.parse("train", "steps")?,
            seed,
            adversarial: adversarial.unwrap_or(true),
            d_steps_per_g_step: r.parse("train", "d_steps_per_g_step")?,
            patch_side,
            val_fraction: r.parse("train", "val_fraction")?,
            val_every: r.parse("train", "val_every")?,
            augment: r.parse("train", "augment")?,
            mae_form: r.parse::<MaeForm>("loss", "mae_form")?,
            equalize_inputs: r.parse("train", "equalize_inputs")?,
        };
        check(train.validate(), "train", "steps", train.steps.to_string())?;
        check(generator.check_side(patch_side, patch_side), "train", "patch_side", patch_side.to_string())?;
        let eval = EvalSection {
            beta1: r.parse("eval", "beta1")?,
            beta2: r.parse("eval", "beta2")?,
            mode: r.parse("eval", "mode")?,
            mask_threshold: r.parse("eval", "mask_threshold")?,
            tile_side: r.auto("eval", "tile_side")?,
            overlap: r.auto("eval", "overlap")?,
        };
        if eval.mask_threshold > 255 {
            return Err(value_err("eval", "mask_threshold", &eval.mask_threshold.to_string(), "exceeds 255"));
        }
        Ok(Self {
            seed,
            scene,
            psf,
            inputs,
            target,
            generator,
            discriminator,
            loss,
            train,
            adversarial,
            eval,
        })
    }

    /// Replaces the seed everywhere it flows.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.scene.spec.seed = seed;
        self.train.seed = seed;
        self
    }

    /// Training settings for `task`, with task-dependent defaults resolved.
    pub fn train_for(&self, task: Task) -> TrainConfig {
        TrainConfig { adversarial: self.adversarial.unwrap_or(task == Task::Cgan), ..self.train.clone() }
    }

    pub fn tile_side(&self) -> usize {
        self.eval.tile_side.unwrap_or(self.train.patch_side)
    }

    pub fn overlap(&self, tile_side: usize) -> usize {
        self.eval.overlap.unwrap_or(tile_side / 4)
    }

    /// Every key with its resolved value, in schema order.
    pub fn resolved_text(&self, task: Option<Task>) -> String {
        let s = &self.scene;
        let g = &self.generator;
        let d = &self.discriminator;
        let t = task.map(|t| self.train_for(t)).unwrap_or_else(|| self.train.clone());
        let adversarial = match (task, self.adversarial) {
            (None, None) => "auto".to_string(),
            (None, Some(v)) => v.to_string(),
            (Some(_), _) => t.adversarial.to_string(),
        };
        let mut out = String::new();
        let mut sec = |name: &str, kv: Vec<(&str, String)>| {
            if !name.is_empty() {
                let _ = writeln!(out, "\n[{name}]");
            }
            for (k, v) in kv {
                let _ = writeln!(out, "{k} = {v}");
            }
        };
        let z: Vec<String> = s.z_values.iter().map(|v| v.to_string()).collect();
        sec("", vec![("seed", self.seed.to_string())]);
        sec(
            "scene",
            vec![
                ("scenes", s.scenes.to_string()),
                ("width", s.spec.width.to_string()),
                ("height", s.spec.height.to_string()),
                ("cell_count_min", s.spec.cell_count.start().to_string()),
                ("cell_count_max", s.spec.cell_count.end().to_string()),
                ("nucleus_radius_min", s.spec.nucleus_radius.start().to_string()),
                ("nucleus_radius_max", s.spec.nucleus_radius.end().to_string()),
                ("filament_count_min", s.spec.filament_count.start().to_string()),
                ("filament_count_max", s.spec.filament_count.end().to_string()),
                ("noise_sigma", s.spec.noise_sigma.to_string()),
                ("bit_depth", s.bit_depth.bits().to_string()),
                ("af", s.af.to_string()),
                ("af_scenes", s.af_scenes.to_string()),
                ("af_channel", s.af_channel.clone()),
                ("z_values", z.join(",")),
            ],
        );
        sec("psf", vec![("sigma0", self.psf.sigma0.to_string()), ("slope", self.psf.slope.to_string())]);
        sec(
            "generator",
            vec![
                ("inputs", self.inputs.join(",")),
                ("target", self.target.clone()),
                ("out_channels", g.out_channels.to_string()),
                ("depth", g.depth.to_string()),
                ("base_width", g.base_width.to_string()),
                ("kernel", g.kernel.to_string()),
                ("leaky_slope", g.leaky_slope.to_string()),
            ],
        );
        sec(
            "discriminator",
            vec![
                ("base_width", d.base_width.to_string()),
                ("kernel", d.kernel.to_string()),
                ("block_count", d.block_count.to_string()),
                ("leaky_slope", d.leaky_slope.to_string()),
            ],
        );
        sec(
            "loss",
            vec![
                ("lambda1", self.loss.lambda1.to_string()),
                ("lambda2", self.loss.lambda2.to_string()),
                ("lambda3", self.loss.lambda3.to_string()),
                ("mae_form", t.mae_form.to_string()),
            ],
        );
        sec(
            "train",
            vec![
                ("learning_rate", t.learning_rate.to_string()),
                ("adam_beta1", t.adam_beta1.to_string()),
                ("adam_beta2", t.adam_beta2.to_string()),
                ("adam_epsilon", t.adam_epsilon.to_string()),
                ("batch_size", t.batch_size.to_string()),
                ("steps", t.steps.to_string()),
                ("adversarial", adversarial),
                ("d_steps_per_g_step", t.d_steps_per_g_step.to_string()),
                ("patch_side", t.patch_side.to_string()),
                ("val_fraction", t.val_fraction.to_string()),
                ("val_every", t.val_every.to_string()),
                ("augment", t.augment.to_string()),
                ("equalize_inputs", t.equalize_inputs.to_string()),
            ],
        );
        let tile = self.tile_side();
        sec(
            "eval",
            vec![
                ("beta1", self.eval.beta1.to_string()),
                ("beta2", self.eval.beta2.to_string()),
                ("mode", self.eval.mode.to_string()),
                ("mask_threshold", self.eval.mask_threshold.to_string()),
                ("tile_side", tile.to_string()),
                ("overlap", self.overlap(tile).to_string()),
            ],
        );
        out
    }
}
