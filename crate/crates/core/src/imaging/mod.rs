//! Line-image preprocessing.
//!
//! The standard pipeline is contrast normalization, tripartite height
//! normalization to 64 rows, removal of clutter from neighbouring lines and
//! slant correction, in that order. Training presentations can be perturbed
//! with [`augment`].

mod augment;
mod clutter;
mod contrast;
mod deslant;
mod extract;
mod height;
mod resample;

use std::path::Path;

use crate::error::{HtrError, Result};

pub use augment::{augment, AugmentationParams};
pub use clutter::{remove_clutter, remove_clutter_with, ClutterConfig};
pub use contrast::{contrast_normalize, contrast_normalize_with, intensity_levels};
pub use deslant::{deslant, estimate_slant, shear, SLANT_SEARCH_DEGREES};
pub use extract::{extract_line, LinePolygon};
pub use height::{estimate_zones, height_normalize, height_normalize_with, ZoneLayout, Zones, LINE_HEIGHT};

/// Intensity below which a pixel counts as ink once contrast is normalized.
pub const INK_THRESHOLD: u8 = 128;

pub const BACKGROUND: u8 = 255;

/// 8-bit grayscale raster. 0 is ink, 255 is background.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

impl GrayImage {
    /// Creates an image filled with `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::from_pixels(width, height, vec![value; width * height])
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(HtrError::InvalidInput(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(HtrError::Shape(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major pixel buffer.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    #[inline]
    pub fn is_ink(&self, x: usize, y: usize) -> bool {
        self.get(x, y) < INK_THRESHOLD
    }

    pub fn ink_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p < INK_THRESHOLD).count()
    }

    /// Loads a PNG or binary PGM. Color images are converted to luma.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| HtrError::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let luma = img.to_luma8();
        let (w, h) = luma.dimensions();
        Self::from_pixels(w as usize, h as usize, luma.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("buffer length matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| HtrError::Image {
                path: path.to_path_buf(),
                source,
            })
    }
}

/// Runs the full preprocessing chain on an extracted line image.
pub fn preprocess(img: &GrayImage) -> Result<GrayImage> {
    let normalized = contrast_normalize(img);
    let sized = height_normalize(&normalized)?;
    let cleaned = remove_clutter(&sized);
    Ok(deslant(&cleaned))
}
