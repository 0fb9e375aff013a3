use super::init::{BnIdx, Init, Layout};
use super::layers::{
    batch_norm_backward, batch_norm_infer, batch_norm_train, leaky_relu, leaky_relu_backward, relu,
    relu_backward, tanh, tanh_backward, BnCache, Conv2d, ConvGeom, ConvTranspose2d,
};
use super::{NetError, ParamSet, Tensor};

/// U-Net generator architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Number of encoder (and decoder) blocks after the initial convolution.
    pub depth: usize,
    pub base_width: usize,
    pub kernel: usize,
    pub leaky_slope: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { in_channels: 2, out_channels: 1, depth: 3, base_width: 16, kernel: 3, leaky_slope: 0.2 }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Config(m));
        if self.kernel != 3 {
            return bad(format!("generator kernel must be 3, got {}", self.kernel));
        }
        if self.out_channels != 1 {
            return bad(format!("generator predicts one channel, got out_channels = {}", self.out_channels));
        }
        if self.in_channels == 0 || self.depth == 0 || self.base_width == 0 {
            return bad("generator in_channels, depth and base_width must be at least 1".into());
        }
        if self.depth > 8 {
            return bad(format!("generator depth {} is beyond the supported 8", self.depth));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return bad(format!("leaky slope {} outside (0, 1)", self.leaky_slope));
        }
        Ok(())
    }

    /// Channel width at level `i` (level 0 is the initial convolution).
    pub fn width(&self, level: usize) -> usize {
        self.base_width << level
    }

    /// Input sides must be multiples of this.
    pub fn side_multiple(&self) -> usize {
        1 << (self.depth + 1)
    }

    pub fn check_side(&self, height: usize, width: usize) -> Result<(), NetError> {
        let m = self.side_multiple();
        if height == 0 || width == 0 || !height.is_multiple_of(m) || !width.is_multiple_of(m) {
            return Err(NetError::Config(format!(
                "input {width}x{height} not divisible by 2^(depth+1) = {m} for depth {}",
                self.depth
            )));
        }
        Ok(())
    }

    /// Trainable scalar count by the closed form over block widths.
    pub fn parameter_count(&self) -> usize {
        let k2 = self.kernel * self.kernel;
        let w = |i| self.width(i);
        let mut n = self.in_channels * k2 * w(0) + w(0);
        for i in 1..=self.depth {
            n += w(i - 1) * k2 * w(i) + 3 * w(i);
        }
        n += w(self.depth) * k2 * w(self.depth - 1) + 3 * w(self.depth - 1);
        for j in 1..self.depth {
            n += 2 * w(j) * k2 * w(j - 1) + 3 * w(j - 1);
        }
        n + 2 * w(0) * k2 * self.out_channels + self.out_channels
    }
}

/// Training uses batch statistics and updates running averages; inference
/// uses the running averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone)]
struct Block<C> {
    layer: C,
    weight: usize,
    bias: usize,
    bn: Option<BnIdx>,
}

/// Tensors retained from a training forward pass.
#[derive(Debug, Clone)]
pub struct GeneratorCache {
    input: Tensor,
    /// Pre-activation inputs and activated inputs per encoder block.
    enc: Vec<(Tensor, Tensor, BnCache)>,
    /// Same for decoder blocks, ordered `depth` down to 1.
    dec: Vec<(Tensor, Tensor, BnCache)>,
    out_pre: Tensor,
    out_act: Tensor,
    output: Tensor,
}

#[derive(Debug, Clone)]
pub struct Generator {
    cfg: GeneratorConfig,
    layout: Layout,
    init: Block<Conv2d>,
    enc: Vec<Block<Conv2d>>,
    dec: Vec<Block<ConvTranspose2d>>,
    out: Block<ConvTranspose2d>,
}

impl Generator {
    pub fn new(cfg: GeneratorConfig) -> Result<Self, NetError> {
        cfg.validate()?;
        let geom = ConvGeom::same(cfg.kernel, 2);
        let k2 = cfg.kernel * cfg.kernel;
        let mut layout = Layout::default();
        let conv_block = |layout: &mut Layout, prefix: &str, cin: usize, cout: usize, bn: bool| {
            let weight = layout.add(format!("{prefix}.w"), cin * cout * k2, Init::Normal, true);
            let bias = layout.add(format!("{prefix}.b"), cout, Init::Zeros, true);
            let bn = bn.then(|| layout.batch_norm(prefix, cout));
            (weight, bias, bn)
        };
        let (weight, bias, bn) = conv_block(&mut layout, "g.init", cfg.in_channels, cfg.width(0), false);
        let init = Block { layer: Conv2d { in_channels: cfg.in_channels, out_channels: cfg.width(0), geom }, weight, bias, bn };
        let mut enc = Vec::new();
        for i in 1..=cfg.depth {
            let (cin, cout) = (cfg.width(i - 1), cfg.width(i));
            let (weight, bias, bn) = conv_block(&mut layout, &format!("g.enc{i}"), cin, cout, true);
            enc.push(Block { layer: Conv2d { in_channels: cin, out_channels: cout, geom }, weight, bias, bn });
        }
        let mut dec = Vec::new();
        for j in (1..=cfg.depth).rev() {
            let cin = if j == cfg.depth { cfg.width(j) } else { 2 * cfg.width(j) };
            let cout = cfg.width(j - 1);
            let (weight, bias, bn) = conv_block(&mut layout, &format!("g.dec{j}"), cin, cout, true);
            dec.push(Block { layer: ConvTranspose2d { in_channels: cin, out_channels: cout, geom }, weight, bias, bn });
        }
        let cin = 2 * cfg.width(0);
        let (weight, bias, bn) = conv_block(&mut layout, "g.out", cin, cfg.out_channels, false);
        let out = Block { layer: ConvTranspose2d { in_channels: cin, out_channels: cfg.out_channels, geom }, weight, bias, bn };
        Ok(Self { cfg, layout, init, enc, dec, out })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    /// Deterministic initialization: normal(0, 0.02) weights, zero biases,
    /// unit batch-norm scales.
    pub fn init_params(&self, seed: u64) -> ParamSet {
        self.layout.build(seed, "init/generator")
    }

    /// Whether `params` has exactly this architecture's tensors.
    pub fn accepts(&self, params: &ParamSet) -> bool {
        self.layout.matches(params)
    }

    fn check_input(&self, params: &ParamSet, x: &Tensor) -> Result<(), NetError> {
        if !self.accepts(params) {
            return Err(NetError::Shape("parameter set does not match the generator architecture".into()));
        }
        if x.channels() != self.cfg.in_channels {
            return Err(NetError::ChannelMismatch {
                expected: self.cfg.in_channels,
                actual: x.channels(),
                names: Vec::new(),
            });
        }
        self.cfg.check_side(x.height(), x.width())?;
        if x.batch() == 0 {
            return Err(NetError::Shape("empty batch".into()));
        }
        Ok(())
    }

    /// Inference with running statistics.
    pub fn infer(&self, params: &ParamSet, x: &Tensor) -> Result<Tensor, NetError> {
        self.check_input(params, x)?;
        let p = |i: usize| params.values(i);
        let bn = |t: &Tensor, b: &BnIdx| batch_norm_infer(t, p(b.gamma), p(b.beta), p(b.mean), p(b.var));
        let slope = self.cfg.leaky_slope;
        let mut e = vec![self.init.layer.forward(x, p(self.init.weight), p(self.init.bias))];
        for blk in &self.enc {
            let a = leaky_relu(e.last().expect("non-empty"), slope);
            let c = blk.layer.forward(&a, p(blk.weight), p(blk.bias));
            e.push(bn(&c, blk.bn.as_ref().expect("encoder norm")));
        }
        let mut d: Option<Tensor> = None;
        for (blk, j) in self.dec.iter().zip((1..=self.cfg.depth).rev()) {
            let pre = match d {
                None => e[j].clone(),
                Some(prev) => Tensor::concat_channels(&prev, &e[j])?,
            };
            let c = blk.layer.forward(&relu(&pre), p(blk.weight), p(blk.bias));
            d = Some(bn(&c, blk.bn.as_ref().expect("decoder norm")));
        }
        let pre = Tensor::concat_channels(&d.expect("depth >= 1"), &e[0])?;
        let c = self.out.layer.forward(&relu(&pre), p(self.out.weight), p(self.out.bias));
        Ok(tanh(&c))
    }

    /// Training forward pass: batch statistics, running averages updated in
    /// `params`, activations retained for [`Generator::backward`].
    pub fn forward_train(&self, params: &mut ParamSet, x: &Tensor) -> Result<(Tensor, GeneratorCache), NetError> {
        self.check_input(params, x)?;
        let slope = self.cfg.leaky_slope;
        let mut e = vec![self.init.layer.forward(x, params.values(self.init.weight), params.values(self.init.bias))];
        let mut enc_cache = Vec::new();
        for blk in &self.enc {
            let pre = e.last().expect("non-empty").clone();
            let a = leaky_relu(&pre, slope);
            let c = blk.layer.forward(&a, params.values(blk.weight), params.values(blk.bias));
            let (y, cache) = bn_train(params, blk.bn.as_ref().expect("encoder norm"), &c);
            e.push(y);
            enc_cache.push((pre, a, cache));
        }
        let mut dec_cache = Vec::new();
        let mut d: Option<Tensor> = None;
        for (blk, j) in self.dec.iter().zip((1..=self.cfg.depth).rev()) {
            let pre = match d.take() {
                None => e[j].clone(),
                Some(prev) => Tensor::concat_channels(&prev, &e[j])?,
            };
            let a = relu(&pre);
            let c = blk.layer.forward(&a, params.values(blk.weight), params.values(blk.bias));
            let (y, cache) = bn_train(params, blk.bn.as_ref().expect("decoder norm"), &c);
            d = Some(y);
            dec_cache.push((pre, a, cache));
        }
        let out_pre = Tensor::concat_channels(&d.expect("depth >= 1"), &e[0])?;
        let out_act = relu(&out_pre);
        let c = self.out.layer.forward(&out_act, params.values(self.out.weight), params.values(self.out.bias));
        let output = tanh(&c);
        let cache = GeneratorCache { input: x.clone(), enc: enc_cache, dec: dec_cache, out_pre, out_act, output: output.clone() };
        Ok((output, cache))
    }

    /// Accumulates parameter gradients of a scalar loss with output gradient
    /// `dy` into `grads` and returns the input gradient.
    pub fn backward(&self, params: &ParamSet, cache: &GeneratorCache, dy: &Tensor, grads: &mut [Vec<f64>]) -> Tensor {
        let depth = self.cfg.depth;
        let slope = self.cfg.leaky_slope;
        let dc = tanh_backward(&cache.output, dy);
        let da = conv_t_back(&self.out, params, &cache.out_act, &dc, grads);
        let dpre = relu_backward(&cache.out_pre, &da);
        let (mut dd, de0) = dpre.split_channels(self.cfg.width(0));
        let mut de: Vec<Option<Tensor>> = vec![None; depth + 1];
        accumulate(&mut de[0], de0);
        // Decoder blocks in reverse forward order: level 1 up to `depth`.
        for (k, j) in (1..=depth).enumerate() {
            let blk = &self.dec[depth - 1 - k];
            let (pre, a, bnc) = &cache.dec[depth - 1 - k];
            let dc = bn_back(params, blk.bn.as_ref().expect("decoder norm"), bnc, &dd, grads);
            let da = conv_t_back(blk, params, a, &dc, grads);
            let dpre = relu_backward(pre, &da);
            if j == depth {
                accumulate(&mut de[depth], dpre);
            } else {
                let (dnext, dskip) = dpre.split_channels(self.cfg.width(j));
                accumulate(&mut de[j], dskip);
                dd = dnext;
            }
        }
        for i in (1..=depth).rev() {
            let blk = &self.enc[i - 1];
            let (pre, a, bnc) = &cache.enc[i - 1];
            let g = de[i].take().expect("every level receives gradient");
            let dc = bn_back(params, blk.bn.as_ref().expect("encoder norm"), bnc, &g, grads);
            let da = {
                let w = params.values(blk.weight);
                let (gw, gb) = two_mut(grads, blk.weight, blk.bias);
                blk.layer.backward(a, w, &dc, gw, gb)
            };
            accumulate(&mut de[i - 1], leaky_relu_backward(pre, slope, &da));
        }
        let g0 = de[0].take().expect("level 0 gradient");
        let w = params.values(self.init.weight);
        let (gw, gb) = two_mut(grads, self.init.weight, self.init.bias);
        self.init.layer.backward(&cache.input, w, &g0, gw, gb)
    }
}

fn accumulate(slot: &mut Option<Tensor>, t: Tensor) {
    match slot {
        Some(acc) => acc.add_assign(&t),
        None => *slot = Some(t),
    }
}

pub(crate) fn two_mut(grads: &mut [Vec<f64>], a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    assert!(a < b, "parameter indices must be increasing");
    let (lo, hi) = grads.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

pub(crate) fn bn_train(params: &mut ParamSet, idx: &BnIdx, x: &Tensor) -> (Tensor, BnCache) {
    let mut mean = std::mem::take(params.values_mut(idx.mean));
    let mut var = std::mem::take(params.values_mut(idx.var));
    let out = batch_norm_train(x, params.values(idx.gamma), params.values(idx.beta), &mut mean, &mut var);
    for v in mean.iter_mut().chain(var.iter_mut()) {
        *v = *v as f32 as f64;
    }
    *params.values_mut(idx.mean) = mean;
    *params.values_mut(idx.var) = var;
    out
}

pub(crate) fn bn_back(params: &ParamSet, idx: &BnIdx, cache: &BnCache, dy: &Tensor, grads: &mut [Vec<f64>]) -> Tensor {
    let (gg, gb) = two_mut(grads, idx.gamma, idx.beta);
    batch_norm_backward(cache, params.values(idx.gamma), dy, gg, gb)
}

fn conv_t_back(blk: &Block<ConvTranspose2d>, params: &ParamSet, a: &Tensor, dc: &Tensor, grads: &mut [Vec<f64>]) -> Tensor {
    let w = params.values(blk.weight);
    let (gw, gb) = two_mut(grads, blk.weight, blk.bias);
    blk.layer.backward(a, w, dc, gw, gb)
}
