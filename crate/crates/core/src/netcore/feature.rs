use crate::error::{HtrError, Result};

/// Dense activation grid, `values[(y * width + x) * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        FeatureMap {
            width,
            height,
            channels,
            values: vec![0.0; width * height * channels],
        }
    }

    pub fn from_values(width: usize, height: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height * channels {
            return Err(HtrError::Shape(format!(
                "{} values for a {width}x{height}x{channels} feature map",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HtrError::InvalidInput("feature map values must be finite".into()));
        }
        Ok(FeatureMap {
            width,
            height,
            channels,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn offset(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    /// Channel vector at `(x, y)`.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> &[f64] {
        let o = self.offset(x, y);
        &self.values[o..o + self.channels]
    }

    #[inline]
    pub fn at_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let o = self.offset(x, y);
        &mut self.values[o..o + self.channels]
    }

    pub(crate) fn expect_channels(&self, channels: usize, what: &str) -> Result<()> {
        if self.channels != channels {
            return Err(HtrError::Shape(format!(
                "{what} expects {channels} input channels, got {}",
                self.channels
            )));
        }
        Ok(())
    }
}

/// How a window of inputs is reduced during subsampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    Mean,
    /// Mean of magnitudes; used on the signed filter-bank responses.
    MeanAbs,
}

/// Non-overlapping `sx x sy` pooling. Partial windows at the right and
/// bottom edges average over the cells they contain.
pub fn pool(input: &FeatureMap, sx: usize, sy: usize, mode: Pooling) -> FeatureMap {
    if sx == 1 && sy == 1 && mode == Pooling::Mean {
        return input.clone();
    }
    let ow = input.width.div_ceil(sx);
    let oh = input.height.div_ceil(sy);
    let ch = input.channels;
    let mut out = FeatureMap::zeros(ow, oh, ch);
    for oy in 0..oh {
        let ys = oy * sy..((oy + 1) * sy).min(input.height);
        for ox in 0..ow {
            let xs = ox * sx..((ox + 1) * sx).min(input.width);
            let count = (ys.len() * xs.len()) as f64;
            let dst = out.offset(ox, oy);
            for y in ys.clone() {
                for x in xs.clone() {
                    let src = input.at(x, y);
                    for c in 0..ch {
                        let v = match mode {
                            Pooling::Mean => src[c],
                            Pooling::MeanAbs => src[c].abs(),
                        };
                        out.values[dst + c] += v;
                    }
                }
            }
            out.values[dst..dst + ch].iter_mut().for_each(|v| *v /= count);
        }
    }
    out
}

/// Gradient of mean [`pool`] with respect to its input.
pub fn pool_backward(grad_out: &FeatureMap, width: usize, height: usize, sx: usize, sy: usize) -> FeatureMap {
    if sx == 1 && sy == 1 {
        return grad_out.clone();
    }
    let ch = grad_out.channels;
    let mut grad_in = FeatureMap::zeros(width, height, ch);
    for y in 0..height {
        let oy = y / sy;
        let rows = ((oy + 1) * sy).min(height) - oy * sy;
        for x in 0..width {
            let ox = x / sx;
            let cols = ((ox + 1) * sx).min(width) - ox * sx;
            let scale = 1.0 / (rows * cols) as f64;
            let g = grad_out.at(ox, oy);
            let dst = grad_in.offset(x, y);
            for c in 0..ch {
                grad_in.values[dst + c] = g[c] * scale;
            }
        }
    }
    grad_in
}
