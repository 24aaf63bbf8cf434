use super::{GrayImage, BACKGROUND};
use crate::error::{HtrError, Result};

/// Closed polygon in page pixel coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinePolygon {
    points: Vec<(i64, i64)>,
}

impl LinePolygon {
    /// Validates point count and area. Bounds are checked against a page in
    /// [`extract_line`].
    pub fn new(points: Vec<(i64, i64)>) -> Result<Self> {
        if points.len() < 3 {
            return Err(HtrError::InvalidInput(format!(
                "polygon needs at least 3 points, got {}",
                points.len()
            )));
        }
        let poly = LinePolygon { points };
        if poly.doubled_area() == 0 {
            return Err(HtrError::InvalidInput("polygon has zero area".into()));
        }
        Ok(poly)
    }

    pub fn points(&self) -> &[(i64, i64)] {
        &self.points
    }

    /// Twice the absolute shoelace area.
    fn doubled_area(&self) -> i64 {
        let n = self.points.len();
        let mut acc = 0i64;
        for i in 0..n {
            let (x0, y0) = self.points[i];
            let (x1, y1) = self.points[(i + 1) % n];
            acc += x0 * y1 - x1 * y0;
        }
        acc.abs()
    }

    /// Inclusive bounding box `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (i64, i64, i64, i64) {
        let xs = self.points.iter().map(|p| p.0);
        let ys = self.points.iter().map(|p| p.1);
        (
            xs.clone().min().unwrap(),
            ys.clone().min().unwrap(),
            xs.max().unwrap(),
            ys.max().unwrap(),
        )
    }

    /// True if the integer point lies inside the polygon or on its boundary.
    pub fn contains(&self, x: i64, y: i64) -> bool {
        let n = self.points.len();
        let mut inside = false;
        for i in 0..n {
            let (x0, y0) = self.points[i];
            let (x1, y1) = self.points[(i + 1) % n];
            if on_segment((x0, y0), (x1, y1), (x, y)) {
                return true;
            }
            // Half-open crossing rule on the edge's y range.
            if (y0 > y) != (y1 > y) {
                // x coordinate of the crossing compared without division
                let lhs = (x - x0) * (y1 - y0);
                let rhs = (x1 - x0) * (y - y0);
                let crosses = if y1 > y0 { lhs < rhs } else { lhs > rhs };
                if crosses {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn on_segment(a: (i64, i64), b: (i64, i64), p: (i64, i64)) -> bool {
    let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    cross == 0
        && p.0 >= a.0.min(b.0)
        && p.0 <= a.0.max(b.0)
        && p.1 >= a.1.min(b.1)
        && p.1 <= a.1.max(b.1)
}

/// Crops the polygon's bounding box out of `page`, blanking pixels that fall
/// outside the polygon.
pub fn extract_line(page: &GrayImage, poly: &LinePolygon) -> Result<GrayImage> {
    let (min_x, min_y, max_x, max_y) = poly.bounds();
    if min_x < 0 || min_y < 0 || max_x >= page.width() as i64 || max_y >= page.height() as i64 {
        return Err(HtrError::Bounds(format!(
            "polygon spans ({min_x},{min_y})-({max_x},{max_y}) on a {}x{} page",
            page.width(),
            page.height()
        )));
    }
    let w = (max_x - min_x + 1) as usize;
    let h = (max_y - min_y + 1) as usize;
    let mut out = GrayImage::filled(w, h, BACKGROUND)?;
    for y in 0..h {
        for x in 0..w {
            let px = min_x + x as i64;
            let py = min_y + y as i64;
            if poly.contains(px, py) {
                out.set(x, y, page.get(px as usize, py as usize));
            }
        }
    }
    Ok(out)
}
