use super::{DiscriminatorConfig, GeneratorConfig, NetError};
use super::adam::AdamState;

/// One named parameter tensor. Buffers (batch-norm running statistics) are
/// stored alongside weights but are not trainable.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub values: Vec<f64>,
    pub trainable: bool,
}

/// Parameters in declaration order; indices are stable for a given config.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a tensor and returns its index.
    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>, trainable: bool) -> usize {
        self.params.push(Param { name: name.into(), values, trainable });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, index: usize) -> &Param {
        &self.params[index]
    }

    pub fn values(&self, index: usize) -> &[f64] {
        &self.params[index].values
    }

    pub fn values_mut(&mut self, index: usize) -> &mut Vec<f64> {
        &mut self.params[index].values
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn find(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.values.len()).sum()
    }

    /// Number of stored scalars, buffers included.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.values.len()).sum()
    }

    /// `‖θ‖₁` over trainable tensors.
    pub fn l1_norm(&self) -> f64 {
        self.params.iter().filter(|p| p.trainable).flat_map(|p| p.values.iter()).map(|v| v.abs()).sum()
    }

    /// Zero gradient buffers shaped like every tensor (buffers get empty vectors).
    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|p| if p.trainable { vec![0.0; p.values.len()] } else { Vec::new() }).collect()
    }

    /// Rounds every value to the nearest `f32` so checkpoints are lossless.
    pub fn snap_f32(&mut self) {
        for p in &mut self.params {
            for v in &mut p.values {
                *v = *v as f32 as f64;
            }
        }
    }
}

/// Generator and discriminator parameters with their architectures and the
/// optimizer moments.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub generator_config: GeneratorConfig,
    pub discriminator_config: DiscriminatorConfig,
    pub generator: ParamSet,
    pub discriminator: ParamSet,
    pub generator_moments: AdamState,
    pub discriminator_moments: AdamState,
    /// Names of the input channels in the order the generator consumes them.
    pub input_channels: Vec<String>,
    pub target_channel: String,
    /// Whether inputs are histogram-equalized before normalization.
    pub equalize_inputs: bool,
}

impl ModelParams {
    /// Freshly initialized networks for `seed`.
    pub fn init(
        generator_config: GeneratorConfig,
        discriminator_config: DiscriminatorConfig,
        input_channels: Vec<String>,
        target_channel: String,
        seed: u64,
    ) -> Result<Self, NetError> {
        if input_channels.len() != generator_config.in_channels {
            return Err(NetError::Config(format!(
                "{} input channel names for a generator with {} inputs",
                input_channels.len(),
                generator_config.in_channels
            )));
        }
        let generator = super::Generator::new(generator_config.clone())?.init_params(seed);
        let discriminator = super::Discriminator::new(discriminator_config.clone())?.init_params(seed);
        Ok(Self {
            generator_moments: AdamState::new(&generator),
            discriminator_moments: AdamState::new(&discriminator),
            generator_config,
            discriminator_config,
            generator,
            discriminator,
            input_channels,
            target_channel,
            equalize_inputs: false,
        })
    }

    pub fn generator_net(&self) -> Result<super::Generator, NetError> {
        super::Generator::new(self.generator_config.clone())
    }

    pub fn discriminator_net(&self) -> Result<super::Discriminator, NetError> {
        super::Discriminator::new(self.discriminator_config.clone())
    }
}
