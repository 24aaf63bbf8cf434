use super::resample::{linear_sample, to_u8};
use super::{GrayImage, BACKGROUND};

/// Largest slant (degrees, either sign) considered by the estimator.
pub const SLANT_SEARCH_DEGREES: i32 = 45;

/// Estimates the dominant slant in whole degrees. Positive angles are strokes
/// whose top leans to the right.
///
/// Each candidate shear is scored by the sum of squared ink counts per column
/// after undoing it; vertical strokes concentrate ink in few columns. Ties go
/// to the smaller magnitude, then to the negative angle.
pub fn estimate_slant(img: &GrayImage) -> i32 {
    let ink: Vec<(f64, f64)> = (0..img.height())
        .flat_map(|y| (0..img.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| img.is_ink(x, y))
        .map(|(x, y)| (x as f64 + 0.5, y as f64 + 0.5))
        .collect();
    if ink.is_empty() {
        return 0;
    }
    let yc = img.height() as f64 / 2.0;
    let span = img.width() as f64 + img.height() as f64 * 2.0;
    let mut counts = vec![0u64; span as usize * 2 + 4];
    let offset = span.ceil() + 1.0;

    let mut best = (0, 0u64);
    let candidates = std::iter::once(0).chain((1..=SLANT_SEARCH_DEGREES).flat_map(|d| [-d, d]));
    for deg in candidates {
        let t = (deg as f64).to_radians().tan();
        counts.iter_mut().for_each(|c| *c = 0);
        for &(x, y) in &ink {
            let bin = (x - (yc - y) * t + offset).floor() as usize;
            counts[bin] += 1;
        }
        let score: u64 = counts.iter().map(|&c| c * c).sum();
        if score > best.1 {
            best = (deg, score);
        }
    }
    best.0
}

/// Horizontal shear about the vertical center: a vertical stroke leans
/// `degrees` to the right afterwards. The canvas widens to keep all content.
pub fn shear(img: &GrayImage, degrees: f64) -> GrayImage {
    if degrees == 0.0 {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let t = degrees.to_radians().tan();
    let yc = h as f64 / 2.0;
    let shift = |y: usize| (yc - (y as f64 + 0.5)) * t;
    let (lo, hi) = (0..h).map(shift).fold((0.0f64, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let left = (-lo).ceil() as usize;
    let right = hi.ceil() as usize;
    let out_w = w + left + right;

    let mut out = GrayImage::filled(out_w, h, BACKGROUND).expect("nonzero dimensions");
    for y in 0..h {
        let d = shift(y);
        for xo in 0..out_w {
            let src = xo as f64 + 0.5 - left as f64 - d;
            let v = linear_sample(w, src, BACKGROUND as f64, |x| img.get(x, y) as f64);
            out.set(xo, y, to_u8(v));
        }
    }
    trim_padding(out, left, right)
}

/// Drops all-background columns from the padded margins only.
fn trim_padding(img: GrayImage, left: usize, right: usize) -> GrayImage {
    let blank = |x: usize| (0..img.height()).all(|y| img.get(x, y) == BACKGROUND);
    let w = img.width();
    let skip_left = (0..left).take_while(|&x| blank(x)).count();
    let skip_right = (0..right).take_while(|&i| blank(w - 1 - i)).count();
    if skip_left == 0 && skip_right == 0 {
        return img;
    }
    let new_w = w - skip_left - skip_right;
    if new_w == 0 {
        return img;
    }
    let mut pixels = Vec::with_capacity(new_w * img.height());
    for y in 0..img.height() {
        pixels.extend((skip_left..skip_left + new_w).map(|x| img.get(x, y)));
    }
    GrayImage::from_pixels(new_w, img.height(), pixels).expect("nonzero dimensions")
}

/// Removes the estimated slant.
pub fn deslant(img: &GrayImage) -> GrayImage {
    shear(img, -(estimate_slant(img) as f64))
}
