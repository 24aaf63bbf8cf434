use super::{GrayImage, BACKGROUND};

const FOREGROUND_PERCENTILE: f64 = 0.05;
const BACKGROUND_PERCENTILE: f64 = 0.95;

/// Nearest-rank percentile over a 256-bin histogram.
fn percentile(hist: &[usize; 256], total: usize, q: f64) -> u8 {
    let rank = ((q * total as f64).ceil() as usize).clamp(1, total);
    let mut seen = 0;
    for (value, &count) in hist.iter().enumerate() {
        seen += count;
        if seen >= rank {
            return value as u8;
        }
    }
    255
}

/// Estimated `(foreground, background)` intensity levels.
///
/// The levels are the 5th and 95th percentiles of the histogram. When ink is
/// so sparse that both percentiles coincide, the extreme intensities are used
/// instead. A constant image yields equal levels.
pub fn intensity_levels(img: &GrayImage) -> (u8, u8) {
    let mut hist = [0usize; 256];
    for &p in img.pixels() {
        hist[p as usize] += 1;
    }
    let total = img.pixels().len();
    let fg = percentile(&hist, total, FOREGROUND_PERCENTILE);
    let bg = percentile(&hist, total, BACKGROUND_PERCENTILE);
    if fg < bg {
        return (fg, bg);
    }
    let min = hist.iter().position(|&c| c > 0).unwrap() as u8;
    let max = 255 - hist.iter().rev().position(|&c| c > 0).unwrap() as u8;
    (min, max)
}

/// Maps the estimated foreground level to 0 and background level to 255.
pub fn contrast_normalize(img: &GrayImage) -> GrayImage {
    let (fg, bg) = intensity_levels(img);
    contrast_normalize_with(img, fg as f64, bg as f64)
}

/// Affine map sending `fg` to 0 and `bg` to 255, clamped. If `bg <= fg` the
/// image carries no usable contrast and becomes all background.
pub fn contrast_normalize_with(img: &GrayImage, fg: f64, bg: f64) -> GrayImage {
    let mut lut = [BACKGROUND; 256];
    if bg > fg {
        let scale = 255.0 / (bg - fg);
        for (v, slot) in lut.iter_mut().enumerate() {
            *slot = ((v as f64 - fg) * scale).round().clamp(0.0, 255.0) as u8;
        }
    }
    let pixels = img.pixels().iter().map(|&p| lut[p as usize]).collect();
    GrayImage::from_pixels(img.width(), img.height(), pixels).expect("same dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_image_is_a_fixed_point() {
        let px: Vec<u8> = (0..24).map(|i| if i % 3 == 0 { 0 } else { 255 }).collect();
        let img = GrayImage::from_pixels(6, 4, px).unwrap();
        assert_eq!(contrast_normalize(&img), img);
    }

    #[test]
    fn two_level_image_is_stretched() {
        // 8 pixels at 50 and 8 at 200: ranks 1 and 16 of 16 give f=50, b=200.
        let px: Vec<u8> = (0..16).map(|i| if i < 8 { 50 } else { 200 }).collect();
        let img = GrayImage::from_pixels(4, 4, px).unwrap();
        assert_eq!(intensity_levels(&img), (50, 200));
        let out = contrast_normalize(&img);
        let expected: Vec<u8> = (0..16).map(|i| if i < 8 { 0 } else { 255 }).collect();
        assert_eq!(out.pixels(), &expected[..]);
    }

    #[test]
    fn constant_image_becomes_background() {
        let img = GrayImage::filled(5, 3, 128).unwrap();
        assert!(contrast_normalize(&img).pixels().iter().all(|&p| p == 255));
    }

    #[test]
    fn sparse_ink_falls_back_to_extremes() {
        let mut img = GrayImage::filled(10, 10, 230).unwrap();
        img.set(3, 3, 40);
        img.set(4, 3, 40);
        let out = contrast_normalize(&img);
        assert_eq!(out.get(3, 3), 0);
        assert_eq!(out.get(0, 0), 255);
    }

    proptest! {
        #[test]
        fn idempotent(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let mut state = seed;
            let px: Vec<u8> = (0..w * h)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (state >> 56) as u8
                })
                .collect();
            let img = GrayImage::from_pixels(w, h, px).unwrap();
            let once = contrast_normalize(&img);
            prop_assert_eq!(contrast_normalize(&once), once);
        }
    }
}
