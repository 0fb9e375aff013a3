//! Layer kernels with explicit forward and backward passes.
//!
//! Every function takes parameters as flat slices and returns or accumulates
//! gradients into caller-owned buffers, so the same kernels serve the
//! networks and the finite-difference checks.

use super::gemm::{gemm, Mat};
use super::Tensor;

/// Geometry shared by a strided convolution and its transpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    /// "Same"-style padding for odd kernels: `(k - 1) / 2`.
    pub fn same(kernel: usize, stride: usize) -> Self {
        Self { kernel, stride, pad: (kernel - 1) / 2 }
    }

    /// Output side of the forward convolution; `None` if the window does not fit.
    pub fn conv_out(&self, side: usize) -> Option<usize> {
        (side + 2 * self.pad).checked_sub(self.kernel).map(|v| v / self.stride + 1)
    }
}

#[allow(clippy::too_many_arguments)]
fn im2col(x: &[f64], c: usize, h: usize, w: usize, g: ConvGeom, ho: usize, wo: usize, cols: &mut [f64]) {
    let k = g.kernel;
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = &mut cols[((ci * k + ki) * k + kj) * ho * wo..][..ho * wo];
                for oi in 0..ho {
                    let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                    let dst = &mut row[oi * wo..(oi + 1) * wo];
                    if ii < 0 || ii >= h as isize {
                        dst.iter_mut().for_each(|v| *v = 0.0);
                        continue;
                    }
                    let src = &plane[ii as usize * w..(ii as usize + 1) * w];
                    for (oj, d) in dst.iter_mut().enumerate() {
                        let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                        *d = if jj < 0 || jj >= w as isize { 0.0 } else { src[jj as usize] };
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im(cols: &[f64], c: usize, h: usize, w: usize, g: ConvGeom, ho: usize, wo: usize, x: &mut [f64]) {
    let k = g.kernel;
    for ci in 0..c {
        let plane = &mut x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = &cols[((ci * k + ki) * k + kj) * ho * wo..][..ho * wo];
                for oi in 0..ho {
                    let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[ii as usize * w..(ii as usize + 1) * w];
                    for (oj, s) in row[oi * wo..(oi + 1) * wo].iter().enumerate() {
                        let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                        if jj >= 0 && jj < w as isize {
                            dst[jj as usize] += s;
                        }
                    }
                }
            }
        }
    }
}

/// Strided 2-D convolution, weights `[out, in, k, k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub geom: ConvGeom,
}

impl Conv2d {
    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.geom.kernel * self.geom.kernel
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.geom.kernel * self.geom.kernel
    }

    fn out_dims(&self, x: &Tensor) -> (usize, usize) {
        let ho = self.geom.conv_out(x.height()).expect("input smaller than kernel");
        let wo = self.geom.conv_out(x.width()).expect("input smaller than kernel");
        (ho, wo)
    }

    pub fn forward(&self, x: &Tensor, weight: &[f64], bias: &[f64]) -> Tensor {
        assert_eq!(x.channels(), self.in_channels, "conv input channels");
        let (n, h, w) = (x.batch(), x.height(), x.width());
        let (ho, wo) = self.out_dims(x);
        let kk = self.patch_len();
        let mut cols = vec![0.0; kk * ho * wo];
        let mut y = Tensor::zeros([n, self.out_channels, ho, wo]);
        for i in 0..n {
            im2col(x.item(i), self.in_channels, h, w, self.geom, ho, wo, &mut cols);
            let out = y.item_mut(i);
            for (co, b) in bias.iter().enumerate() {
                out[co * ho * wo..(co + 1) * ho * wo].iter_mut().for_each(|v| *v = *b);
            }
            gemm(Mat::new(weight, self.out_channels, kk), Mat::new(&cols, kk, ho * wo), 1.0, out);
        }
        y
    }

    /// Returns `dx`; accumulates into `dweight` and `dbias`.
    pub fn backward(&self, x: &Tensor, weight: &[f64], dy: &Tensor, dweight: &mut [f64], dbias: &mut [f64]) -> Tensor {
        let (n, h, w) = (x.batch(), x.height(), x.width());
        let (ho, wo) = (dy.height(), dy.width());
        let kk = self.patch_len();
        let mut cols = vec![0.0; kk * ho * wo];
        let mut dcols = vec![0.0; kk * ho * wo];
        let mut dx = Tensor::zeros(x.shape());
        for i in 0..n {
            let g = dy.item(i);
            for (co, db) in dbias.iter_mut().enumerate() {
                *db += g[co * ho * wo..(co + 1) * ho * wo].iter().sum::<f64>();
            }
            im2col(x.item(i), self.in_channels, h, w, self.geom, ho, wo, &mut cols);
            let gm = Mat::new(g, self.out_channels, ho * wo);
            gemm(gm, Mat::new(&cols, kk, ho * wo).t(), 1.0, dweight);
            gemm(Mat::new(weight, self.out_channels, kk).t(), gm, 0.0, &mut dcols);
            col2im(&dcols, self.in_channels, h, w, self.geom, ho, wo, dx.item_mut(i));
        }
        dx
    }
}

/// Transposed convolution producing `stride * side` outputs, weights
/// `[in, out, k, k]`. It is the adjoint of a [`Conv2d`] with the same geometry
/// that maps the large raster back to the small one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvTranspose2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub geom: ConvGeom,
}

impl ConvTranspose2d {
    pub fn weight_len(&self) -> usize {
        self.in_channels * self.out_channels * self.geom.kernel * self.geom.kernel
    }

    fn patch_len(&self) -> usize {
        self.out_channels * self.geom.kernel * self.geom.kernel
    }

    fn big_dims(&self, x: &Tensor) -> (usize, usize) {
        let (h, w) = (x.height() * self.geom.stride, x.width() * self.geom.stride);
        debug_assert_eq!(self.geom.conv_out(h), Some(x.height()));
        debug_assert_eq!(self.geom.conv_out(w), Some(x.width()));
        (h, w)
    }

    pub fn forward(&self, x: &Tensor, weight: &[f64], bias: &[f64]) -> Tensor {
        assert_eq!(x.channels(), self.in_channels, "transposed conv input channels");
        let (n, hs, ws) = (x.batch(), x.height(), x.width());
        let (h, w) = self.big_dims(x);
        let kk = self.patch_len();
        let mut cols = vec![0.0; kk * hs * ws];
        let mut y = Tensor::zeros([n, self.out_channels, h, w]);
        for i in 0..n {
            gemm(
                Mat::new(weight, self.in_channels, kk).t(),
                Mat::new(x.item(i), self.in_channels, hs * ws),
                0.0,
                &mut cols,
            );
            let out = y.item_mut(i);
            col2im(&cols, self.out_channels, h, w, self.geom, hs, ws, out);
            for (co, b) in bias.iter().enumerate() {
                out[co * h * w..(co + 1) * h * w].iter_mut().for_each(|v| *v += *b);
            }
        }
        y
    }

    pub fn backward(&self, x: &Tensor, weight: &[f64], dy: &Tensor, dweight: &mut [f64], dbias: &mut [f64]) -> Tensor {
        let (n, hs, ws) = (x.batch(), x.height(), x.width());
        let (h, w) = (dy.height(), dy.width());
        let kk = self.patch_len();
        let mut dcols = vec![0.0; kk * hs * ws];
        let mut dx = Tensor::zeros(x.shape());
        for i in 0..n {
            let g = dy.item(i);
            for (co, db) in dbias.iter_mut().enumerate() {
                *db += g[co * h * w..(co + 1) * h * w].iter().sum::<f64>();
            }
            im2col(g, self.out_channels, h, w, self.geom, hs, ws, &mut dcols);
            let dc = Mat::new(&dcols, kk, hs * ws);
            gemm(Mat::new(x.item(i), self.in_channels, hs * ws), dc.t(), 1.0, dweight);
            gemm(Mat::new(weight, self.in_channels, kk), dc, 0.0, dx.item_mut(i));
        }
        dx
    }
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Saved activations for the batch-norm backward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Tensor,
    pub inv_std: Vec<f64>,
}

/// Per-channel batch normalization over `(batch, height, width)`. With a
/// batch of one these are the instance statistics.
pub fn batch_norm_train(
    x: &Tensor,
    gamma: &[f64],
    beta: &[f64],
    running_mean: &mut [f64],
    running_var: &mut [f64],
) -> (Tensor, BnCache) {
    let [n, c, h, w] = x.shape();
    let hw = h * w;
    let m = (n * hw) as f64;
    let mut xhat = Tensor::zeros(x.shape());
    let mut y = Tensor::zeros(x.shape());
    let mut inv_std = vec![0.0; c];
    for ch in 0..c {
        let mut sum = 0.0;
        for i in 0..n {
            sum += x.item(i)[ch * hw..(ch + 1) * hw].iter().sum::<f64>();
        }
        let mean = sum / m;
        let mut var = 0.0;
        for i in 0..n {
            var += x.item(i)[ch * hw..(ch + 1) * hw].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
        var /= m;
        let is = 1.0 / (var + BN_EPS).sqrt();
        inv_std[ch] = is;
        for i in 0..n {
            let src = &x.item(i)[ch * hw..(ch + 1) * hw];
            let off = ch * hw;
            let xh = &mut xhat.item_mut(i)[off..off + hw];
            for (d, s) in xh.iter_mut().zip(src) {
                *d = (s - mean) * is;
            }
        }
        for i in 0..n {
            let off = ch * hw;
            let (g, b) = (gamma[ch], beta[ch]);
            let xh: Vec<f64> = xhat.item(i)[off..off + hw].to_vec();
            for (d, s) in y.item_mut(i)[off..off + hw].iter_mut().zip(&xh) {
                *d = g * s + b;
            }
        }
        running_mean[ch] = (1.0 - BN_MOMENTUM) * running_mean[ch] + BN_MOMENTUM * mean;
        running_var[ch] = (1.0 - BN_MOMENTUM) * running_var[ch] + BN_MOMENTUM * var;
    }
    (y, BnCache { xhat, inv_std })
}

pub fn batch_norm_infer(x: &Tensor, gamma: &[f64], beta: &[f64], running_mean: &[f64], running_var: &[f64]) -> Tensor {
    let [n, c, h, w] = x.shape();
    let hw = h * w;
    let mut y = x.clone();
    for i in 0..n {
        let item = y.item_mut(i);
        for ch in 0..c {
            let is = 1.0 / (running_var[ch] + BN_EPS).sqrt();
            let (g, b, mu) = (gamma[ch], beta[ch], running_mean[ch]);
            for v in &mut item[ch * hw..(ch + 1) * hw] {
                *v = g * (*v - mu) * is + b;
            }
        }
    }
    y
}

/// Returns `dx`; accumulates `dgamma` and `dbeta`.
pub fn batch_norm_backward(cache: &BnCache, gamma: &[f64], dy: &Tensor, dgamma: &mut [f64], dbeta: &mut [f64]) -> Tensor {
    let [n, c, h, w] = dy.shape();
    let hw = h * w;
    let m = (n * hw) as f64;
    let mut dx = Tensor::zeros(dy.shape());
    for ch in 0..c {
        let (mut sum_dy, mut sum_dy_xhat) = (0.0, 0.0);
        for i in 0..n {
            let g = &dy.item(i)[ch * hw..(ch + 1) * hw];
            let xh = &cache.xhat.item(i)[ch * hw..(ch + 1) * hw];
            for (a, b) in g.iter().zip(xh) {
                sum_dy += a;
                sum_dy_xhat += a * b;
            }
        }
        dgamma[ch] += sum_dy_xhat;
        dbeta[ch] += sum_dy;
        let k = gamma[ch] * cache.inv_std[ch] / m;
        for i in 0..n {
            let off = ch * hw;
            let g: Vec<f64> = dy.item(i)[off..off + hw].to_vec();
            let xh: Vec<f64> = cache.xhat.item(i)[off..off + hw].to_vec();
            for ((d, a), b) in dx.item_mut(i)[off..off + hw].iter_mut().zip(&g).zip(&xh) {
                *d = k * (m * a - sum_dy - b * sum_dy_xhat);
            }
        }
    }
    dx
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { slope * v })
}

pub fn leaky_relu_backward(x: &Tensor, slope: f64, dy: &Tensor) -> Tensor {
    let data = x.data().iter().zip(dy.data()).map(|(&v, &g)| if v > 0.0 { g } else { slope * g }).collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}

pub fn relu(x: &Tensor) -> Tensor {
    leaky_relu(x, 0.0)
}

pub fn relu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    leaky_relu_backward(x, 0.0, dy)
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(f64::tanh)
}

/// Gradient through `tanh` given its output `y`.
pub fn tanh_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let data = y.data().iter().zip(dy.data()).map(|(&t, &g)| g * (1.0 - t * t)).collect();
    Tensor::from_vec(y.shape(), data).expect("same shape")
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer on flattened items, weights `[out, in]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub in_features: usize,
    pub out_features: usize,
}

impl Linear {
    pub fn weight_len(&self) -> usize {
        self.in_features * self.out_features
    }

    /// `x` is `[batch, in]` row-major; returns `[batch, out]`.
    pub fn forward(&self, x: &[f64], batch: usize, weight: &[f64], bias: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = (0..batch).flat_map(|_| bias.iter().copied()).collect();
        gemm(
            Mat::new(x, batch, self.in_features),
            Mat::new(weight, self.out_features, self.in_features).t(),
            1.0,
            &mut y,
        );
        y
    }

    pub fn backward(
        &self,
        x: &[f64],
        batch: usize,
        weight: &[f64],
        dy: &[f64],
        dweight: &mut [f64],
        dbias: &mut [f64],
    ) -> Vec<f64> {
        for row in dy.chunks_exact(self.out_features) {
            for (d, g) in dbias.iter_mut().zip(row) {
                *d += g;
            }
        }
        let g = Mat::new(dy, batch, self.out_features);
        gemm(g.t(), Mat::new(x, batch, self.in_features), 1.0, dweight);
        let mut dx = vec![0.0; batch * self.in_features];
        gemm(g, Mat::new(weight, self.out_features, self.in_features), 0.0, &mut dx);
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct-definition convolution used as an oracle.
    fn conv_naive(x: &Tensor, wt: &[f64], b: &[f64], co: usize, g: ConvGeom) -> Tensor {
        let [n, ci, h, w] = x.shape();
        let ho = g.conv_out(h).unwrap();
        let wo = g.conv_out(w).unwrap();
        let k = g.kernel;
        let mut y = Tensor::zeros([n, co, ho, wo]);
        for i in 0..n {
            for o in 0..co {
                for r in 0..ho {
                    for c in 0..wo {
                        let mut acc = b[o];
                        for q in 0..ci {
                            for a in 0..k {
                                for bb in 0..k {
                                    let rr = (r * g.stride + a) as isize - g.pad as isize;
                                    let cc = (c * g.stride + bb) as isize - g.pad as isize;
                                    if rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w {
                                        acc += wt[((o * ci + q) * k + a) * k + bb]
                                            * x.item(i)[(q * h + rr as usize) * w + cc as usize];
                                    }
                                }
                            }
                        }
                        y.item_mut(i)[(o * ho + r) * wo + c] = acc;
                    }
                }
            }
        }
        y
    }

    fn pseudo(n: usize, seed: f64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 + 1.0) * seed).sin()).collect()
    }

    #[test]
    fn conv_matches_direct_definition() {
        for (k, s) in [(3, 2), (5, 2), (3, 1)] {
            let g = ConvGeom::same(k, s);
            let conv = Conv2d { in_channels: 2, out_channels: 3, geom: g };
            let x = Tensor::from_vec([2, 2, 8, 6], pseudo(192, 0.13)).unwrap();
            let wt = pseudo(conv.weight_len(), 0.29);
            let b = vec![0.1, -0.2, 0.3];
            let y = conv.forward(&x, &wt, &b);
            let want = conv_naive(&x, &wt, &b, 3, g);
            assert_eq!(y.shape(), want.shape());
            for (a, b) in y.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transpose_is_adjoint_of_conv() {
        // <conv(u), v> == <u, convT(v)> with zero bias and shared weights.
        let g = ConvGeom::same(3, 2);
        let conv = Conv2d { in_channels: 3, out_channels: 2, geom: g };
        let convt = ConvTranspose2d { in_channels: 2, out_channels: 3, geom: g };
        let wt = pseudo(conv.weight_len(), 0.41);
        let u = Tensor::from_vec([1, 3, 8, 8], pseudo(192, 0.17)).unwrap();
        let v = Tensor::from_vec([1, 2, 4, 4], pseudo(32, 0.23)).unwrap();
        let cu = conv.forward(&u, &wt, &[0.0; 2]);
        let tv = convt.forward(&v, &wt, &[0.0; 3]);
        assert_eq!(tv.shape(), [1, 3, 8, 8]);
        let lhs: f64 = cu.data().iter().zip(v.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.data().iter().zip(tv.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn batch_norm_normalizes_and_tracks() {
        let x = Tensor::from_vec([2, 2, 2, 2], pseudo(16, 0.7).iter().map(|v| 3.0 * v + 1.0).collect()).unwrap();
        let (mut rm, mut rv) = (vec![0.0; 2], vec![1.0; 2]);
        let (y, _) = batch_norm_train(&x, &[1.0, 1.0], &[0.0, 0.0], &mut rm, &mut rv);
        for ch in 0..2 {
            let vals: Vec<f64> = (0..2).flat_map(|i| y.item(i)[ch * 4..ch * 4 + 4].to_vec()).collect();
            let mean = vals.iter().sum::<f64>() / 8.0;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3);
        }
        assert!(rm.iter().all(|v| *v != 0.0));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
