use super::generator::{bn_back, bn_train, two_mut};
use super::init::{BnIdx, Init, Layout};
use super::layers::{batch_norm_infer, leaky_relu, leaky_relu_backward, sigmoid, BnCache, Conv2d, ConvGeom, Linear};
use super::{NetError, ParamSet, Tensor};

/// Convolutional discriminator scoring `(input, candidate)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorConfig {
    /// Channels of the conditioning input; the candidate adds one more.
    pub in_channels: usize,
    /// Patch side the fully connected layer is sized for.
    pub side: usize,
    pub kernel: usize,
    pub block_count: usize,
    pub base_width: usize,
    pub leaky_slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self { in_channels: 2, side: 32, kernel: 5, block_count: 3, base_width: 16, leaky_slope: 0.2 }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Config(m));
        if self.kernel != 5 {
            return bad(format!("discriminator kernel must be 5, got {}", self.kernel));
        }
        if self.block_count != 3 {
            return bad(format!("discriminator has 3 blocks, got block_count = {}", self.block_count));
        }
        if self.in_channels == 0 || self.base_width == 0 {
            return bad("discriminator in_channels and base_width must be at least 1".into());
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return bad(format!("leaky slope {} outside (0, 1)", self.leaky_slope));
        }
        let m = self.side_multiple();
        if self.side == 0 || !self.side.is_multiple_of(m) {
            return bad(format!("discriminator side {} not divisible by {m}", self.side));
        }
        Ok(())
    }

    pub fn side_multiple(&self) -> usize {
        1 << (self.block_count + 1)
    }

    fn width(&self, level: usize) -> usize {
        self.base_width << level
    }

    fn flat_features(&self) -> usize {
        let s = self.side / self.side_multiple();
        self.width(self.block_count) * s * s
    }
}

#[derive(Debug, Clone)]
struct ConvBn {
    layer: Conv2d,
    weight: usize,
    bias: usize,
    bn: BnIdx,
}

/// Activations retained for [`Discriminator::backward`].
#[derive(Debug, Clone)]
pub struct DiscriminatorCache {
    /// Input to each convolution.
    conv_in: Vec<Tensor>,
    bn: Vec<BnCache>,
    /// Batch-norm outputs of the blocks (before LeakyReLU).
    normed: Vec<Tensor>,
    flat: Vec<f64>,
    batch: usize,
}

#[derive(Debug, Clone)]
pub struct Discriminator {
    cfg: DiscriminatorConfig,
    layout: Layout,
    convs: Vec<ConvBn>,
    fc: Linear,
    fc_weight: usize,
    fc_bias: usize,
}

impl Discriminator {
    pub fn new(cfg: DiscriminatorConfig) -> Result<Self, NetError> {
        cfg.validate()?;
        let geom = ConvGeom::same(cfg.kernel, 2);
        let k2 = cfg.kernel * cfg.kernel;
        let mut layout = Layout::default();
        let mut convs = Vec::new();
        for level in 0..=cfg.block_count {
            let cin = if level == 0 { cfg.in_channels + 1 } else { cfg.width(level - 1) };
            let cout = cfg.width(level);
            let prefix = if level == 0 { "d.init".to_string() } else { format!("d.block{level}") };
            let weight = layout.add(format!("{prefix}.w"), cin * cout * k2, Init::Normal, true);
            let bias = layout.add(format!("{prefix}.b"), cout, Init::Zeros, true);
            let bn = layout.batch_norm(&prefix, cout);
            convs.push(ConvBn { layer: Conv2d { in_channels: cin, out_channels: cout, geom }, weight, bias, bn });
        }
        let fc = Linear { in_features: cfg.flat_features(), out_features: 1 };
        let fc_weight = layout.add("d.fc.w".into(), fc.weight_len(), Init::Normal, true);
        let fc_bias = layout.add("d.fc.b".into(), 1, Init::Zeros, true);
        Ok(Self { cfg, layout, convs, fc, fc_weight, fc_bias })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.cfg
    }

    pub fn init_params(&self, seed: u64) -> ParamSet {
        self.layout.build(seed, "init/discriminator")
    }

    pub fn accepts(&self, params: &ParamSet) -> bool {
        self.layout.matches(params)
    }

    fn join(&self, params: &ParamSet, input: &Tensor, candidate: &Tensor) -> Result<Tensor, NetError> {
        if !self.accepts(params) {
            return Err(NetError::Shape("parameter set does not match the discriminator architecture".into()));
        }
        if input.channels() != self.cfg.in_channels || candidate.channels() != 1 {
            return Err(NetError::Shape(format!(
                "discriminator expects {} input channel(s) and 1 candidate channel, got {} and {}",
                self.cfg.in_channels,
                input.channels(),
                candidate.channels()
            )));
        }
        let side = self.cfg.side;
        if input.height() != side || input.width() != side {
            return Err(NetError::Shape(format!(
                "discriminator sized for {side}x{side} patches, got {}x{}",
                input.width(),
                input.height()
            )));
        }
        Tensor::concat_channels(input, candidate)
    }

    /// Logits per batch item, inference mode.
    pub fn infer_logits(&self, params: &ParamSet, input: &Tensor, candidate: &Tensor) -> Result<Vec<f64>, NetError> {
        let mut h = self.join(params, input, candidate)?;
        let p = |i: usize| params.values(i);
        for (level, c) in self.convs.iter().enumerate() {
            let y = c.layer.forward(&h, p(c.weight), p(c.bias));
            let y = batch_norm_infer(&y, p(c.bn.gamma), p(c.bn.beta), p(c.bn.mean), p(c.bn.var));
            h = if level == 0 { y } else { leaky_relu(&y, self.cfg.leaky_slope) };
        }
        let n = h.batch();
        Ok(self.fc.forward(h.data(), n, p(self.fc_weight), p(self.fc_bias)))
    }

    /// Scores in (0, 1) per batch item, inference mode.
    pub fn infer(&self, params: &ParamSet, input: &Tensor, candidate: &Tensor) -> Result<Vec<f64>, NetError> {
        Ok(self.infer_logits(params, input, candidate)?.into_iter().map(sigmoid).collect())
    }

    /// Training forward pass returning logits. Running statistics are
    /// updated only when `track_stats` is set.
    pub fn forward_train(
        &self,
        params: &mut ParamSet,
        input: &Tensor,
        candidate: &Tensor,
        track_stats: bool,
    ) -> Result<(Vec<f64>, DiscriminatorCache), NetError> {
        let mut h = self.join(params, input, candidate)?;
        let mut cache = DiscriminatorCache { conv_in: Vec::new(), bn: Vec::new(), normed: Vec::new(), flat: Vec::new(), batch: h.batch() };
        for (level, c) in self.convs.iter().enumerate() {
            let y = c.layer.forward(&h, params.values(c.weight), params.values(c.bias));
            let (normed, bc) = if track_stats {
                bn_train(params, &c.bn, &y)
            } else {
                let (mean, var) = (params.values(c.bn.mean).to_vec(), params.values(c.bn.var).to_vec());
                let out = bn_train(params, &c.bn, &y);
                *params.values_mut(c.bn.mean) = mean;
                *params.values_mut(c.bn.var) = var;
                out
            };
            cache.conv_in.push(std::mem::replace(&mut h, Tensor::zeros([0, 0, 0, 0])));
            h = if level == 0 { normed.clone() } else { leaky_relu(&normed, self.cfg.leaky_slope) };
            cache.bn.push(bc);
            cache.normed.push(normed);
        }
        let n = h.batch();
        cache.flat = h.into_data();
        let logits = self.fc.forward(&cache.flat, n, params.values(self.fc_weight), params.values(self.fc_bias));
        Ok((logits, cache))
    }

    /// Accumulates parameter gradients for logit gradients `dlogits` and
    /// returns the gradient with respect to the candidate.
    pub fn backward(&self, params: &ParamSet, cache: &DiscriminatorCache, dlogits: &[f64], grads: &mut [Vec<f64>]) -> Tensor {
        let n = cache.batch;
        let dflat = {
            let w = params.values(self.fc_weight);
            let (gw, gb) = two_mut(grads, self.fc_weight, self.fc_bias);
            self.fc.backward(&cache.flat, n, w, dlogits, gw, gb)
        };
        let last = cache.normed.last().expect("blocks").shape();
        let mut dh = Tensor::from_vec(last, dflat).expect("flat features match");
        for level in (0..self.convs.len()).rev() {
            let c = &self.convs[level];
            let dnormed = if level == 0 { dh } else { leaky_relu_backward(&cache.normed[level], self.cfg.leaky_slope, &dh) };
            let dy = bn_back(params, &c.bn, &cache.bn[level], &dnormed, grads);
            let w = params.values(c.weight);
            let (gw, gb) = two_mut(grads, c.weight, c.bias);
            dh = c.layer.backward(&cache.conv_in[level], w, &dy, gw, gb);
        }
        dh.split_channels(self.cfg.in_channels).1
    }
}
