use std::f64::consts::PI;

use super::FeatureMap;
use crate::error::{HtrError, Result};
use crate::imaging::{GrayImage, LINE_HEIGHT};

pub const GABOR_WAVELENGTHS: [f64; 2] = [4.0, 8.0];
pub const GABOR_ORIENTATIONS_DEG: [f64; 4] = [0.0, 45.0, 90.0, 135.0];
pub const GABOR_CHANNELS: usize = 8;
const RADIUS: i64 = 4;
const SIZE: usize = (2 * RADIUS + 1) as usize;
/// L1 norm of every kernel. Large enough that responses to stroke edges
/// are of order one, which the fan-in scaled initialization expects.
pub const GABOR_L1_NORM: f64 = 20.0;

/// Fixed bank of real Gabor kernels: 2 wavelengths x 4 orientations, 9x9
/// support, sigma half the wavelength. Each kernel has its mean removed and
/// L1 norm [`GABOR_L1_NORM`].
#[derive(Debug, Clone)]
pub struct GaborBank {
    kernels: Vec<[f64; SIZE * SIZE]>,
}

impl Default for GaborBank {
    fn default() -> Self {
        Self::new()
    }
}

impl GaborBank {
    pub fn new() -> Self {
        let mut kernels = Vec::with_capacity(GABOR_CHANNELS);
        for &lambda in &GABOR_WAVELENGTHS {
            for &deg in &GABOR_ORIENTATIONS_DEG {
                kernels.push(kernel(lambda, deg.to_radians()));
            }
        }
        GaborBank { kernels }
    }

    pub fn channels(&self) -> usize {
        self.kernels.len()
    }

    pub fn radius(&self) -> usize {
        RADIUS as usize
    }

    /// Kernel weight of `channel` at offset `(dx, dy)` from the center.
    pub fn weight(&self, channel: usize, dx: i64, dy: i64) -> f64 {
        self.kernels[channel][((dy + RADIUS) as usize) * SIZE + (dx + RADIUS) as usize]
    }

    /// Convolution of a single-channel map with every kernel, mirroring at
    /// the borders (the edge pixel is not repeated).
    pub fn convolve(&self, input: &FeatureMap) -> FeatureMap {
        assert_eq!(input.channels(), 1);
        let (w, h) = (input.width(), input.height());
        let ch = self.kernels.len();
        let xs: Vec<Vec<usize>> = (0..w)
            .map(|x| (-RADIUS..=RADIUS).map(|d| reflect(x as i64 - d, w)).collect())
            .collect();
        let ys: Vec<Vec<usize>> = (0..h)
            .map(|y| (-RADIUS..=RADIUS).map(|d| reflect(y as i64 - d, h)).collect())
            .collect();
        let src = input.values();
        let mut out = FeatureMap::zeros(w, h, ch);
        let mut patch = [0.0; SIZE * SIZE];
        for y in 0..h {
            for x in 0..w {
                for (j, &sy) in ys[y].iter().enumerate() {
                    for (i, &sx) in xs[x].iter().enumerate() {
                        patch[j * SIZE + i] = src[sy * w + sx];
                    }
                }
                let dst = out.at_mut(x, y);
                for (c, k) in self.kernels.iter().enumerate() {
                    dst[c] = k.iter().zip(patch.iter()).map(|(a, b)| a * b).sum();
                }
            }
        }
        out
    }
}

fn kernel(lambda: f64, theta: f64) -> [f64; SIZE * SIZE] {
    let sigma = 0.5 * lambda;
    let mut k = [0.0; SIZE * SIZE];
    for dy in -RADIUS..=RADIUS {
        for dx in -RADIUS..=RADIUS {
            let (x, y) = (dx as f64, dy as f64);
            let xr = x * theta.cos() + y * theta.sin();
            let yr = -x * theta.sin() + y * theta.cos();
            let envelope = (-(xr * xr + yr * yr) / (2.0 * sigma * sigma)).exp();
            k[((dy + RADIUS) as usize) * SIZE + (dx + RADIUS) as usize] = envelope * (2.0 * PI * xr / lambda).cos();
        }
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    let l1: f64 = k.iter().map(|v| v.abs()).sum();
    k.iter_mut().for_each(|v| *v *= GABOR_L1_NORM / l1);
    k
}

/// Mirror index into `0..n` without repeating the edge sample.
pub(crate) fn reflect(mut i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Network input: ink intensity in `[0, 1]` (0 for background).
pub fn image_to_input(img: &GrayImage) -> FeatureMap {
    let values = img.pixels().iter().map(|&p| (255 - p) as f64 / 255.0).collect();
    FeatureMap::from_values(img.width(), img.height(), 1, values).expect("dimensions match")
}

/// Responses of the fixed Gabor bank on a normalized line image.
pub fn gabor_layer(img: &GrayImage, bank: &GaborBank) -> Result<FeatureMap> {
    if img.height() != LINE_HEIGHT {
        return Err(HtrError::Shape(format!(
            "feature extraction expects {LINE_HEIGHT}-row images, got {}",
            img.height()
        )));
    }
    Ok(bank.convolve(&image_to_input(img)))
}
