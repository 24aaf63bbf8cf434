use super::resample::{box_sample, to_u8};
use super::{GrayImage, BACKGROUND};
use crate::error::{HtrError, Result};

/// Output height of every normalized line.
pub const LINE_HEIGHT: usize = 64;

/// Rows given to the ascender, x-height and descender zones of the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZoneLayout {
    pub top: usize,
    pub center: usize,
    pub bottom: usize,
}

impl Default for ZoneLayout {
    fn default() -> Self {
        ZoneLayout {
            top: 16,
            center: 32,
            bottom: 16,
        }
    }
}

impl ZoneLayout {
    pub fn total(&self) -> usize {
        self.top + self.center + self.bottom
    }
}

/// Reference lines of a text line, as row edges: the x-height band is
/// `corpus..baseline`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Zones {
    pub corpus: usize,
    pub baseline: usize,
}

/// Estimates corpus line and baseline from the horizontal ink-density
/// profile: the band spans every row whose ink count reaches half the peak.
pub fn estimate_zones(img: &GrayImage) -> Result<Zones> {
    let profile: Vec<usize> = (0..img.height())
        .map(|y| (0..img.width()).filter(|&x| img.is_ink(x, y)).count())
        .collect();
    let peak = profile.iter().copied().max().unwrap_or(0);
    if peak == 0 {
        return Err(HtrError::BlankLine);
    }
    let dense = |&(_, &c): &(usize, &usize)| 2 * c >= peak;
    let corpus = profile.iter().enumerate().find(dense).unwrap().0;
    let lowest = profile.iter().enumerate().rev().find(dense).unwrap().0;
    Ok(Zones {
        corpus,
        baseline: lowest + 1,
    })
}

/// Rescales the three vertical zones independently onto the default
/// 16/32/16 layout. Width follows the x-height scale factor.
pub fn height_normalize(img: &GrayImage) -> Result<GrayImage> {
    height_normalize_with(img, ZoneLayout::default())
}

pub fn height_normalize_with(img: &GrayImage, layout: ZoneLayout) -> Result<GrayImage> {
    if layout.center == 0 {
        return Err(HtrError::Config("x-height zone must have at least one row".into()));
    }
    let zones = estimate_zones(img)?;
    let src_bounds = [0, zones.corpus, zones.baseline, img.height()];
    let dst_bounds = [
        0,
        layout.top,
        layout.top + layout.center,
        layout.total(),
    ];

    let (w, h) = (img.width(), img.height());
    let out_h = layout.total();
    // Vertical pass, one zone at a time. Zones without source rows stay blank.
    let mut columns = vec![BACKGROUND as f64; w * out_h];
    for zone in 0..3 {
        let (s0, s1) = (src_bounds[zone] as f64, src_bounds[zone + 1] as f64);
        let (o0, o1) = (dst_bounds[zone], dst_bounds[zone + 1]);
        if o1 == o0 || s1 == s0 {
            continue;
        }
        let scale = (s1 - s0) / (o1 - o0) as f64;
        for yo in o0..o1 {
            let a = s0 + (yo - o0) as f64 * scale;
            let b = s0 + (yo + 1 - o0) as f64 * scale;
            for x in 0..w {
                columns[yo * w + x] = box_sample(h, a, b, |y| img.get(x, y) as f64);
            }
        }
    }

    let center_src = (zones.baseline - zones.corpus) as f64;
    let out_w = ((w as f64 * layout.center as f64 / center_src).round() as usize).max(1);
    let x_scale = w as f64 / out_w as f64;
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let row = &columns[y * w..(y + 1) * w];
        for xo in 0..out_w {
            let a = xo as f64 * x_scale;
            let b = (xo + 1) as f64 * x_scale;
            pixels.push(to_u8(box_sample(w, a, b, |x| row[x])));
        }
    }
    GrayImage::from_pixels(out_w, out_h, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band_image(w: usize, h: usize, rows: std::ops::RangeInclusive<usize>) -> GrayImage {
        let mut img = GrayImage::filled(w, h, 255).unwrap();
        for y in rows {
            for x in 0..w {
                img.set(x, y, 0);
            }
        }
        img
    }

    #[test]
    fn blank_line_is_an_error() {
        let img = GrayImage::filled(10, 10, 255).unwrap();
        assert!(matches!(height_normalize(&img), Err(HtrError::BlankLine)));
    }

    #[test]
    fn ink_rows_ten_to_twenty_become_the_center_band() {
        // Uniform ink on rows 10..=20 of 40: corpus edge 10, baseline edge 21.
        let img = band_image(22, 40, 10..=20);
        let zones = estimate_zones(&img).unwrap();
        assert_eq!(zones, Zones { corpus: 10, baseline: 21 });
        let out = height_normalize(&img).unwrap();
        assert_eq!(out.height(), 64);
        // width scales by 32 / 11
        assert_eq!(out.width(), 64);
        for y in 0..64 {
            let expected = if (16..48).contains(&y) { 0 } else { 255 };
            assert_eq!(out.get(10, y), expected, "row {y}");
        }
    }

    #[test]
    fn already_normalized_line_is_unchanged() {
        // x-height band rows 16..48, plus sparse ascender/descender marks.
        let mut img = band_image(32, 64, 16..=47);
        img.set(3, 5, 0);
        img.set(7, 60, 0);
        let out = height_normalize(&img).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn empty_zones_fill_with_background() {
        // ink touches the top row, so the ascender zone has no source rows
        let img = band_image(8, 10, 0..=9);
        let out = height_normalize(&img).unwrap();
        assert_eq!(out.height(), 64);
        assert!((0..16).all(|y| out.get(0, y) == 255));
        assert!((16..48).all(|y| out.get(0, y) == 0));
    }
}
