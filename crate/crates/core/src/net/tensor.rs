use super::NetError;

/// Dense `(batch, channels, height, width)` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self { shape, data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f64>) -> Result<Self, NetError> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(NetError::Shape(format!("{} values for shape {shape:?}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    /// Elements per batch item.
    pub fn item_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn item(&self, n: usize) -> &[f64] {
        let l = self.item_len();
        &self.data[n * l..(n + 1) * l]
    }

    pub fn item_mut(&mut self, n: usize) -> &mut [f64] {
        let l = self.item_len();
        &mut self.data[n * l..(n + 1) * l]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stacks items `[C, H, W]` into a batch.
    pub fn stack(items: &[Vec<f64>], channels: usize, height: usize, width: usize) -> Result<Self, NetError> {
        let mut data = Vec::with_capacity(items.len() * channels * height * width);
        for it in items {
            if it.len() != channels * height * width {
                return Err(NetError::Shape(format!(
                    "item of {} values does not match {channels}x{height}x{width}",
                    it.len()
                )));
            }
            data.extend_from_slice(it);
        }
        Self::from_vec([items.len(), channels, height, width], data)
    }

    /// Concatenates along the channel axis.
    pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor, NetError> {
        let [n, ca, h, w] = a.shape;
        let [nb, cb, hb, wb] = b.shape;
        if n != nb || h != hb || w != wb {
            return Err(NetError::Shape(format!("cannot concatenate {:?} with {:?}", a.shape, b.shape)));
        }
        let mut out = Tensor::zeros([n, ca + cb, h, w]);
        for i in 0..n {
            let dst = out.item_mut(i);
            dst[..ca * h * w].copy_from_slice(a.item(i));
            dst[ca * h * w..].copy_from_slice(b.item(i));
        }
        Ok(out)
    }

    /// Inverse of [`Tensor::concat_channels`]: the first `ca` channels and the rest.
    pub fn split_channels(&self, ca: usize) -> (Tensor, Tensor) {
        let [n, c, h, w] = self.shape;
        let mut a = Tensor::zeros([n, ca, h, w]);
        let mut b = Tensor::zeros([n, c - ca, h, w]);
        for i in 0..n {
            let src = self.item(i);
            a.item_mut(i).copy_from_slice(&src[..ca * h * w]);
            b.item_mut(i).copy_from_slice(&src[ca * h * w..]);
        }
        (a, b)
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape, other.shape, "shape mismatch in add_assign");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}
