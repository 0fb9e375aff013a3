//! Central finite-difference checks of every hand-written backward pass.
//!
//! Each check draws random small instances, contracts the layer output with
//! a random cotangent to get a scalar, and compares analytic gradients of
//! that scalar against `(f(x + h) - f(x - h)) / 2h`. Differences below the
//! rounding noise of that quotient count as agreement.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::layers::{
    batch_norm_backward, batch_norm_train, leaky_relu, leaky_relu_backward, relu, relu_backward, sigmoid, tanh,
    tanh_backward, Conv2d, ConvGeom, ConvTranspose2d, Linear,
};
use super::loss::{adversarial, adversarial_logit_grad, discriminator_logit_grads, discriminator_loss, reconstruction, reconstruction_grad};
use super::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, MaeForm, ParamSet, Tensor};
use crate::rng::{self, StreamRng};

const STEP: f64 = 1e-6;
/// Relative one-sided slope disagreement treated as a kink crossing.
const KINK: f64 = 2e-5;
/// Denominator floor so vanishing gradients compare absolutely.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub layer: &'static str,
    pub instances: usize,
    pub compared: usize,
    /// Coordinates whose finite-difference step straddled a kink.
    pub skipped: usize,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    /// Error within `tolerance` and at most 5% of coordinates skipped.
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance && self.skipped * 20 <= self.compared + self.skipped
    }
}

/// Relative disagreement beyond the rounding noise of the quotient.
fn rel_error(a: f64, n: f64, noise: f64) -> f64 {
    ((a - n).abs() - noise).max(0.0) / a.abs().max(n.abs()).max(FLOOR)
}

fn normal_vec(r: &mut StreamRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * { let z: f64 = StandardNormal.sample(r); z }).collect::<Vec<f64>>()
}

/// Values bounded away from zero so kinked activations stay differentiable.
fn away_from_zero(r: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m: f64 = r.random_range(0.05..1.5);
            if r.random::<bool>() { m } else { -m }
        })
        .collect()
}

fn tensor(shape: [usize; 4], data: Vec<f64>) -> Tensor {
    Tensor::from_vec(shape, data).expect("shape matches")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central difference and its rounding noise for one coordinate; `None`
/// when the one-sided slopes disagree, meaning the step crossed a
/// ReLU-type kink.
type Probe = Option<(f64, f64)>;

fn probe(x: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<Probe> {
    let f0 = f(x);
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + STEP;
            let up = f(x);
            x[i] = orig - STEP;
            let down = f(x);
            x[i] = orig;
            let noise = 64.0 * f64::EPSILON * (up.abs() + down.abs() + f0.abs()) / STEP;
            let (right, left) = ((up - f0) / STEP, (f0 - down) / STEP);
            if (right - left).abs() > KINK * right.abs().max(left.abs()).max(FLOOR) + noise {
                None
            } else {
                Some(((up - down) / (2.0 * STEP), noise))
            }
        })
        .collect()
}

/// `(compared, skipped, worst elementwise relative error)`.
fn elementwise(analytic: &[f64], probes: &[Probe]) -> (usize, usize, f64) {
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for (a, p) in analytic.iter().zip(probes) {
        match p {
            Some((n, noise)) => worst = worst.max(rel_error(*a, *n, *noise)),
            None => skipped += 1,
        }
    }
    (probes.len() - skipped, skipped, worst)
}

/// `(compared, skipped, ‖a - n‖ / max(‖a‖, ‖n‖))` over the kink-free coordinates.
fn normwise(analytic: &[f64], probes: &[Probe]) -> (usize, usize, f64) {
    let (mut diff, mut na, mut nn, mut noise2, mut skipped) = (0.0, 0.0, 0.0, 0.0, 0);
    for (a, p) in analytic.iter().zip(probes) {
        match p {
            Some((n, noise)) => {
                diff += (a - n) * (a - n);
                na += a * a;
                nn += n * n;
                noise2 += noise * noise;
            }
            None => skipped += 1,
        }
    }
    let err = (diff.sqrt() - noise2.sqrt()).max(0.0) / na.sqrt().max(nn.sqrt()).max(FLOOR);
    (probes.len() - skipped, skipped, err)
}

/// Elementwise comparison over every coordinate of `x`.
fn compare(x: &mut [f64], analytic: &[f64], f: impl FnMut(&[f64]) -> f64) -> (usize, usize, f64) {
    elementwise(analytic, &probe(x, f))
}

/// Normwise comparison, used for whole networks where individual
/// coordinates sit close to kinks.
fn compare_norm(x: &mut [f64], analytic: &[f64], f: impl FnMut(&[f64]) -> f64) -> (usize, usize, f64) {
    normwise(analytic, &probe(x, f))
}

struct Acc {
    report: GradCheckReport,
}

impl Acc {
    fn new(layer: &'static str) -> Self {
        Self { report: GradCheckReport { layer, instances: 0, compared: 0, skipped: 0, max_rel_error: 0.0 } }
    }

    fn add(&mut self, (n, skipped, e): (usize, usize, f64)) {
        self.report.compared += n;
        self.report.skipped += skipped;
        self.report.max_rel_error = self.report.max_rel_error.max(e);
    }
}

fn small_dims(r: &mut StreamRng) -> (usize, usize, usize) {
    (r.random_range(1..=2), r.random_range(1..=3), r.random_range(1..=3))
}

fn check_conv(r: &mut StreamRng, instances: usize, kernel: usize, name: &'static str) -> GradCheckReport {
    let mut acc = Acc::new(name);
    for _ in 0..instances {
        let (n, cin, cout) = small_dims(r);
        let side = 2 * r.random_range(1..=2);
        let conv = Conv2d { in_channels: cin, out_channels: cout, geom: ConvGeom::same(kernel, 2) };
        let mut x = normal_vec(r, n * cin * side * side, 1.0);
        let mut w = normal_vec(r, conv.weight_len(), 0.5);
        let mut b = normal_vec(r, cout, 0.5);
        let shape = [n, cin, side, side];
        let y = conv.forward(&tensor(shape, x.clone()), &w, &b);
        let cot = normal_vec(r, y.data().len(), 1.0);
        let (mut gw, mut gb) = (vec![0.0; w.len()], vec![0.0; b.len()]);
        let dx = conv.backward(&tensor(shape, x.clone()), &w, &tensor(y.shape(), cot.clone()), &mut gw, &mut gb);
        let (w0, b0, x0) = (w.clone(), b.clone(), x.clone());
        acc.add(compare(&mut x, dx.data(), |xv| dot(conv.forward(&tensor(shape, xv.to_vec()), &w0, &b0).data(), &cot)));
        acc.add(compare(&mut w, &gw, |wv| dot(conv.forward(&tensor(shape, x0.clone()), wv, &b0).data(), &cot)));
        acc.add(compare(&mut b, &gb, |bv| dot(conv.forward(&tensor(shape, x0.clone()), &w0, bv).data(), &cot)));
        acc.report.instances += 1;
    }
    acc.report
}

fn check_conv_transpose(r: &mut StreamRng, instances: usize) -> GradCheckReport {
    let mut acc = Acc::new("conv_transpose2d_s2");
    for _ in 0..instances {
        let (n, cin, cout) = small_dims(r);
        let side = r.random_range(1..=2);
        let layer = ConvTranspose2d { in_channels: cin, out_channels: cout, geom: ConvGeom::same(3, 2) };
        let shape = [n, cin, side, side];
        let mut x = normal_vec(r, n * cin * side * side, 1.0);
        let mut w = normal_vec(r, layer.weight_len(), 0.5);
        let mut b = normal_vec(r, cout, 0.5);
        let y = layer.forward(&tensor(shape, x.clone()), &w, &b);
        let cot = normal_vec(r, y.data().len(), 1.0);
        let (mut gw, mut gb) = (vec![0.0; w.len()], vec![0.0; b.len()]);
        let dx = layer.backward(&tensor(shape, x.clone()), &w, &tensor(y.shape(), cot.clone()), &mut gw, &mut gb);
        let (w0, b0, x0) = (w.clone(), b.clone(), x.clone());
        acc.add(compare(&mut x, dx.data(), |xv| dot(layer.forward(&tensor(shape, xv.to_vec()), &w0, &b0).data(), &cot)));
        acc.add(compare(&mut w, &gw, |wv| dot(layer.forward(&tensor(shape, x0.clone()), wv, &b0).data(), &cot)));
        acc.add(compare(&mut b, &gb, |bv| dot(layer.forward(&tensor(shape, x0.clone()), &w0, bv).data(), &cot)));
        acc.report.instances += 1;
    }
    acc.report
}

fn check_batch_norm(r: &mut StreamRng, instances: usize) -> GradCheckReport {
    let mut acc = Acc::new("batch_norm");
    for _ in 0..instances {
        let (n, c, _) = small_dims(r);
        let side = r.random_range(2..=4);
        let shape = [n, c, side, side];
        let mut x = normal_vec(r, n * c * side * side, 1.0);
        let mut gamma = normal_vec(r, c, 1.0);
        let mut beta = normal_vec(r, c, 1.0);
        let run = |xv: &[f64], g: &[f64], b: &[f64]| {
            let (mut m, mut v) = (vec![0.0; c], vec![1.0; c]);
            batch_norm_train(&tensor(shape, xv.to_vec()), g, b, &mut m, &mut v)
        };
        let (y, cache) = run(&x, &gamma, &beta);
        let cot = normal_vec(r, y.data().len(), 1.0);
        let (mut gg, mut gb) = (vec![0.0; c], vec![0.0; c]);
        let dx = batch_norm_backward(&cache, &gamma, &tensor(shape, cot.clone()), &mut gg, &mut gb);
        let (g0, b0, x0) = (gamma.clone(), beta.clone(), x.clone());
        acc.add(compare(&mut x, dx.data(), |xv| dot(run(xv, &g0, &b0).0.data(), &cot)));
        acc.add(compare(&mut gamma, &gg, |gv| dot(run(&x0, gv, &b0).0.data(), &cot)));
        acc.add(compare(&mut beta, &gb, |bv| dot(run(&x0, &g0, bv).0.data(), &cot)));
        acc.report.instances += 1;
    }
    acc.report
}

fn check_pointwise(
    r: &mut StreamRng,
    instances: usize,
    name: &'static str,
    forward: impl Fn(&Tensor) -> Tensor,
    backward: impl Fn(&Tensor, &Tensor, &Tensor) -> Tensor,
) -> GradCheckReport {
    let mut acc = Acc::new(name);
    for _ in 0..instances {
        let (n, c, _) = small_dims(r);
        let side = r.random_range(1..=4);
        let shape = [n, c, side, side];
        let mut x = away_from_zero(r, n * c * side * side);
        let y = forward(&tensor(shape, x.clone()));
        let cot = normal_vec(r, y.data().len(), 1.0);
        let dx = backward(&tensor(shape, x.clone()), &y, &tensor(shape, cot.clone()));
        acc.add(compare(&mut x, dx.data(), |xv| dot(forward(&tensor(shape, xv.to_vec())).data(), &cot)));
        acc.report.instances += 1;
    }
    acc.report
}

fn check_sigmoid(r: &mut StreamRng, instances: usize) -> GradCheckReport {
    // Sigmoid enters only through the two adversarial losses on logits.
    let mut acc = Acc::new("sigmoid");
    for _ in 0..instances {
        let n = r.random_range(1..=4);
        let mut real = normal_vec(r, n, 2.0);
        let mut fake = normal_vec(r, n, 2.0);
        let sig = |z: &[f64]| z.iter().map(|&v| sigmoid(v)).collect::<Vec<_>>();
        let (gr, gf) = discriminator_logit_grads(&real, &fake);
        let (r0, f0) = (real.clone(), fake.clone());
        acc.add(compare(&mut real, &gr, |z| discriminator_loss(&sig(z), &sig(&f0)).expect("same length")));
        acc.add(compare(&mut fake, &gf, |z| discriminator_loss(&sig(&r0), &sig(z)).expect("same length")));
        let mut logits = normal_vec(r, n, 2.0);
        let g = adversarial_logit_grad(&logits);
        acc.add(compare(&mut logits, &g, |z| adversarial(&sig(z))));
        acc.report.instances += 1;
    }
    acc.report
}

fn check_linear(r: &mut StreamRng, instances: usize) -> GradCheckReport {
    let mut acc = Acc::new("fully_connected");
    for _ in 0..instances {
        let n = r.random_range(1..=3);
        let layer = Linear { in_features: r.random_range(1..=16), out_features: r.random_range(1..=3) };
        let mut x = normal_vec(r, n * layer.in_features, 1.0);
        let mut w = normal_vec(r, layer.weight_len(), 0.5);
        let mut b = normal_vec(r, layer.out_features, 0.5);
        let cot = normal_vec(r, n * layer.out_features, 1.0);
        let (mut gw, mut gb) = (vec![0.0; w.len()], vec![0.0; b.len()]);
        let dx = layer.backward(&x, n, &w, &cot, &mut gw, &mut gb);
        let (w0, b0, x0) = (w.clone(), b.clone(), x.clone());
        acc.add(compare(&mut x, &dx, |xv| dot(&layer.forward(xv, n, &w0, &b0), &cot)));
        acc.add(compare(&mut w, &gw, |wv| dot(&layer.forward(&x0, n, wv, &b0), &cot)));
        acc.add(compare(&mut b, &gb, |bv| dot(&layer.forward(&x0, n, &w0, bv), &cot)));
        acc.report.instances += 1;
    }
    acc.report
}

fn check_l1(r: &mut StreamRng, instances: usize) -> GradCheckReport {
    let mut acc = Acc::new("l1_terms");
    for i in 0..instances {
        let form = if i % 2 == 0 { MaeForm::Signed } else { MaeForm::Magnitude };
        let (n, _, _) = small_dims(r);
        let side = r.random_range(1..=4);
        let shape = [n, 1, side, side];
        let len = n * side * side;
        let target: Vec<f64> = (0..len).map(|_| r.random_range(-0.9..0.9)).collect();
        // Keep |pred| and |pred| - |target| away from the kinks.
        let mut pred: Vec<f64> = target
            .iter()
            .map(|&t| {
                let d: f64 = r.random_range(0.05..0.3);
                let p = if r.random::<bool>() { t + d } else { t - d };
                if p.abs() < 0.02 { p + 0.1 } else { p }
            })
            .collect();
        let t = tensor(shape, target);
        let g = reconstruction_grad(&tensor(shape, pred.clone()), &t, form).expect("same shape");
        acc.add(compare(&mut pred, g.data(), |p| reconstruction(&tensor(shape, p.to_vec()), &t, form).expect("same shape")));
        let mut theta = away_from_zero(r, 6);
        let gt: Vec<f64> = theta.iter().map(|v| v.signum()).collect();
        acc.add(compare(&mut theta, &gt, |th| th.iter().map(|v| v.abs()).sum()));
        acc.report.instances += 1;
    }
    acc.report
}

fn perturb_params(params: &mut ParamSet, r: &mut StreamRng) {
    for p in params.iter_mut() {
        if p.trainable {
            for v in &mut p.values {
                *v += 0.3 * { let z: f64 = StandardNormal.sample(r); z };
            }
        }
    }
}

fn check_generator(r: &mut StreamRng, instances: usize) -> GradCheckReport {
    let mut acc = Acc::new("generator_end_to_end");
    for i in 0..instances {
        let cfg = GeneratorConfig { in_channels: r.random_range(1..=2), depth: 1 + i % 2, base_width: 2, ..GeneratorConfig::default() };
        let g = Generator::new(cfg.clone()).expect("valid config");
        let mut params = g.init_params(i as u64);
        perturb_params(&mut params, r);
        // Twice the minimum side keeps the bottleneck batch norm non-degenerate.
        let side = 2 * cfg.side_multiple();
        let shape = [2, cfg.in_channels, side, side];
        let x = tensor(shape, normal_vec(r, 2 * cfg.in_channels * side * side, 1.0));
        let cot = normal_vec(r, 2 * side * side, 1.0);
        let mut scratch = params.clone();
        let (y, cache) = g.forward_train(&mut scratch, &x).expect("valid input");
        let mut grads = params.zero_grads();
        let dx = g.backward(&params, &cache, &tensor(y.shape(), cot.clone()), &mut grads);
        let loss = |p: &ParamSet, xv: &Tensor| {
            let mut p = p.clone();
            dot(g.forward_train(&mut p, xv).expect("valid input").0.data(), &cot)
        };
        let mut xv = x.data().to_vec();
        acc.add(compare_norm(&mut xv, dx.data(), |v| loss(&params, &tensor(shape, v.to_vec()))));
        for idx in 0..params.len() {
            if !params.get(idx).trainable {
                continue;
            }
            let mut vals = params.values(idx).to_vec();
            let mut probe = params.clone();
            acc.add(compare_norm(&mut vals, &grads[idx], |v| {
                probe.values_mut(idx).copy_from_slice(v);
                loss(&probe, &x)
            }));
        }
        acc.report.instances += 1;
    }
    acc.report
}

fn check_discriminator(r: &mut StreamRng, instances: usize) -> GradCheckReport {
    let mut acc = Acc::new("discriminator_end_to_end");
    for i in 0..instances {
        let cfg = DiscriminatorConfig { in_channels: 1, side: 16, base_width: 2, ..DiscriminatorConfig::default() };
        let d = Discriminator::new(cfg).expect("valid config");
        let mut params = d.init_params(i as u64);
        perturb_params(&mut params, r);
        let shape = [2, 1, 16, 16];
        let input = tensor(shape, normal_vec(r, 512, 1.0));
        let cand = tensor(shape, normal_vec(r, 512, 1.0));
        let cot = normal_vec(r, 2, 1.0);
        let mut scratch = params.clone();
        let (_, cache) = d.forward_train(&mut scratch, &input, &cand, false).expect("valid input");
        let mut grads = params.zero_grads();
        let dc = d.backward(&params, &cache, &cot, &mut grads);
        let loss = |p: &ParamSet, c: &Tensor| {
            let mut p = p.clone();
            dot(&d.forward_train(&mut p, &input, c, false).expect("valid input").0, &cot)
        };
        let mut cv = cand.data().to_vec();
        acc.add(compare_norm(&mut cv, dc.data(), |v| loss(&params, &tensor(shape, v.to_vec()))));
        for idx in 0..params.len() {
            if !params.get(idx).trainable {
                continue;
            }
            // Sample a handful of coordinates of the larger tensors.
            let len = params.values(idx).len();
            let picks: Vec<usize> = if len <= 8 { (0..len).collect() } else { (0..8).map(|_| r.random_range(0..len)).collect() };
            let mut trial = params.clone();
            let mut analytic = Vec::with_capacity(picks.len());
            let mut probes = Vec::with_capacity(picks.len());
            for k in picks {
                let mut v = vec![params.values(idx)[k]];
                probes.extend(probe(&mut v, |s| {
                    trial.values_mut(idx)[k] = s[0];
                    loss(&trial, &cand)
                }));
                trial.values_mut(idx)[k] = params.values(idx)[k];
                analytic.push(grads[idx][k]);
            }
            acc.add(normwise(&analytic, &probes));
        }
        acc.report.instances += 1;
    }
    acc.report
}

/// Runs every check with `instances` random cases each.
pub fn check_all(seed: u64, instances: usize) -> Vec<GradCheckReport> {
    let mut r = rng::stream(seed, "gradcheck");
    let slope = 0.2;
    vec![
        check_conv(&mut r, instances, 3, "conv2d_s2_k3"),
        check_conv(&mut r, instances, 5, "conv2d_s2_k5"),
        check_conv_transpose(&mut r, instances),
        check_batch_norm(&mut r, instances),
        check_pointwise(&mut r, instances, "leaky_relu", |x| leaky_relu(x, slope), |x, _, g| leaky_relu_backward(x, slope, g)),
        check_pointwise(&mut r, instances, "relu", relu, |x, _, g| relu_backward(x, g)),
        check_pointwise(&mut r, instances, "tanh", tanh, |_, y, g| tanh_backward(y, g)),
        check_sigmoid(&mut r, instances),
        check_linear(&mut r, instances),
        check_l1(&mut r, instances),
        check_generator(&mut r, instances),
        check_discriminator(&mut r, instances),
    ]
}
