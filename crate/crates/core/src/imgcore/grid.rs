use super::ImageError;

/// Sample depth an image was read from or should be written with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn maxval(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            8 => Some(BitDepth::Eight),
            16 => Some(BitDepth::Sixteen),
            _ => None,
        }
    }
}

/// Single-channel raster with row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
    source_bit_depth: BitDepth,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage { width, height });
        }
        if values.len() != width * height {
            return Err(ImageError::LengthMismatch { expected: width * height, actual: values.len() });
        }
        if let Some((index, &value)) =
            values.iter().enumerate().find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(ImageError::ValueOutOfRange { index, value });
        }
        Ok(Self { width, height, values, source_bit_depth: BitDepth::Eight })
    }

    /// Builds an image, clamping every value into `[0, 1]`. NaN maps to 0.
    pub fn from_clamped(width: usize, height: usize, mut values: Vec<f64>) -> Result<Self, ImageError> {
        for v in &mut values {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(width, height, values)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, ImageError> {
        let mut values = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(width, height, values)
    }

    pub fn with_bit_depth(mut self, depth: BitDepth) -> Self {
        self.source_bit_depth = depth;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn source_bit_depth(&self) -> BitDepth {
        self.source_bit_depth
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn same_dims(&self, other: &ImageGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }

    /// Copies the `side_h x side_w` window anchored at `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, side_h: usize, side_w: usize) -> Result<Self, ImageError> {
        if row + side_h > self.height || col + side_w > self.width {
            return Err(ImageError::Dimension(format!(
                "window {side_h}x{side_w} at ({row}, {col}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        let mut values = Vec::with_capacity(side_h * side_w);
        for r in row..row + side_h {
            values.extend_from_slice(&self.values[r * self.width + col..r * self.width + col + side_w]);
        }
        Ok(Self { width: side_w, height: side_h, values, source_bit_depth: self.source_bit_depth })
    }
}

/// Co-registered named channels over one raster geometry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldOfView {
    channels: Vec<(String, ImageGrid)>,
}

impl FieldOfView {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a channel. Names must be unique and non-empty and every channel
    /// must share the geometry of the first.
    pub fn insert(&mut self, name: impl Into<String>, image: ImageGrid) -> Result<(), ImageError> {
        let name = name.into();
        if name.is_empty() {
            return Err(ImageError::Channel("channel name must be non-empty".into()));
        }
        if self.get(&name).is_some() {
            return Err(ImageError::Channel(format!("duplicate channel `{name}`")));
        }
        if let Some((first_name, first)) = self.channels.first() {
            if !first.same_dims(&image) {
                return Err(ImageError::Channel(format!(
                    "channel `{name}` is {}x{} but `{first_name}` is {}x{}",
                    image.width(),
                    image.height(),
                    first.width(),
                    first.height()
                )));
            }
        }
        self.channels.push((name, image));
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, image: ImageGrid) -> Result<Self, ImageError> {
        self.insert(name, image)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&ImageGrid> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, img)| img)
    }

    pub fn require(&self, name: &str) -> Result<&ImageGrid, ImageError> {
        self.get(name).ok_or_else(|| ImageError::Channel(format!("missing channel `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|(n, _)| n.as_str())
    }

    pub fn channels(&self) -> &[(String, ImageGrid)] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.channels.first().map_or(0, |(_, i)| i.width())
    }

    pub fn height(&self) -> usize {
        self.channels.first().map_or(0, |(_, i)| i.height())
    }

    /// A new view holding only `names`, in that order.
    pub fn select(&self, names: &[String]) -> Result<Self, ImageError> {
        let mut out = Self::new();
        for n in names {
            out.insert(n.clone(), self.require(n)?.clone())?;
        }
        Ok(out)
    }
}
