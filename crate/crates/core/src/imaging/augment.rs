use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    contrast_normalize_with, deslant, height_normalize_with, intensity_levels, remove_clutter, shear, GrayImage,
    ZoneLayout, LINE_HEIGHT,
};
use crate::error::{HtrError, Result};

/// Ranges of the random perturbations applied to training presentations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationParams {
    /// Shift of each contrast endpoint, as a fraction of the estimated range.
    pub contrast_jitter: f64,
    /// Relative change of the ascender and descender zone heights.
    pub zone_jitter: f64,
    /// Extra shear after slant correction, in degrees.
    pub slant_jitter: f64,
    pub seed: u64,
}

impl Default for AugmentationParams {
    fn default() -> Self {
        AugmentationParams {
            contrast_jitter: 0.1,
            zone_jitter: 0.15,
            slant_jitter: 5.0,
            seed: 0,
        }
    }
}

impl AugmentationParams {
    pub fn none(seed: u64) -> Self {
        AugmentationParams {
            contrast_jitter: 0.0,
            zone_jitter: 0.0,
            slant_jitter: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fraction_ok = |v: f64| (0.0..=0.5).contains(&v);
        if !fraction_ok(self.contrast_jitter) || !fraction_ok(self.zone_jitter) {
            return Err(HtrError::Config(format!(
                "contrast and zone jitter must lie in [0, 0.5], got {} and {}",
                self.contrast_jitter, self.zone_jitter
            )));
        }
        if !(0.0..=15.0).contains(&self.slant_jitter) {
            return Err(HtrError::Config(format!(
                "slant jitter must lie in [0, 15] degrees, got {}",
                self.slant_jitter
            )));
        }
        Ok(())
    }
}

fn jitter(rng: &mut ChaCha8Rng, range: f64) -> f64 {
    if range == 0.0 {
        0.0
    } else {
        rng.random_range(-range..=range)
    }
}

/// Runs the preprocessing chain with randomly perturbed parameters. With all
/// ranges zero the result equals [`super::preprocess`].
pub fn augment(img: &GrayImage, params: &AugmentationParams) -> Result<GrayImage> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let (fg, bg) = intensity_levels(img);
    let range = (bg as f64 - fg as f64).max(1.0);
    let fg = fg as f64 + jitter(&mut rng, params.contrast_jitter) * range;
    let bg = bg as f64 + jitter(&mut rng, params.contrast_jitter) * range;
    let normalized = contrast_normalize_with(img, fg, bg);

    let base = ZoneLayout::default();
    let top = (base.top as f64 * (1.0 + jitter(&mut rng, params.zone_jitter))).round() as usize;
    let bottom = (base.bottom as f64 * (1.0 + jitter(&mut rng, params.zone_jitter))).round() as usize;
    let layout = ZoneLayout {
        top,
        center: LINE_HEIGHT - top - bottom,
        bottom,
    };
    let sized = height_normalize_with(&normalized, layout)?;
    let cleaned = remove_clutter(&sized);

    let extra_slant = jitter(&mut rng, params.slant_jitter);
    Ok(shear(&deslant(&cleaned), extra_slant))
}
