use super::{GrayImage, BACKGROUND};

/// Thresholds for discarding fragments of neighbouring lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutterConfig {
    /// Fraction of the image height forming the top and bottom bands.
    pub margin: f64,
    /// Components smaller than this fraction of the median area are removable.
    pub area_fraction: f64,
    /// 8-connectivity when true, 4-connectivity otherwise.
    pub eight_connected: bool,
}

impl Default for ClutterConfig {
    fn default() -> Self {
        ClutterConfig {
            margin: 0.15,
            area_fraction: 0.25,
            eight_connected: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Component {
    pub area: usize,
    pub min_y: usize,
    pub max_y: usize,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Two-pass connected-component labeling of ink pixels. Returns a label per
/// pixel (`usize::MAX` for background) and the component statistics indexed
/// by label.
pub(crate) fn label_components(img: &GrayImage, eight: bool) -> (Vec<usize>, Vec<Component>) {
    let (w, h) = (img.width(), img.height());
    let mut provisional = vec![usize::MAX; w * h];
    let mut sets = DisjointSet { parent: Vec::new() };
    for y in 0..h {
        for x in 0..w {
            if !img.is_ink(x, y) {
                continue;
            }
            let mut neighbours = [usize::MAX; 4];
            if x > 0 {
                neighbours[0] = provisional[y * w + x - 1];
            }
            if y > 0 {
                neighbours[1] = provisional[(y - 1) * w + x];
                if eight && x > 0 {
                    neighbours[2] = provisional[(y - 1) * w + x - 1];
                }
                if eight && x + 1 < w {
                    neighbours[3] = provisional[(y - 1) * w + x + 1];
                }
            }
            let label = match neighbours.iter().copied().filter(|&l| l != usize::MAX).min() {
                Some(l) => l,
                None => {
                    sets.parent.push(sets.parent.len());
                    sets.parent.len() - 1
                }
            };
            for &n in neighbours.iter().filter(|&&l| l != usize::MAX) {
                sets.union(label, n);
            }
            provisional[y * w + x] = label;
        }
    }

    let mut dense = vec![usize::MAX; sets.parent.len()];
    let mut components: Vec<Component> = Vec::new();
    let mut labels = provisional;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if labels[i] == usize::MAX {
                continue;
            }
            let root = sets.find(labels[i]);
            if dense[root] == usize::MAX {
                dense[root] = components.len();
                components.push(Component {
                    area: 0,
                    min_y: y,
                    max_y: y,
                });
            }
            let c = &mut components[dense[root]];
            c.area += 1;
            c.min_y = c.min_y.min(y);
            c.max_y = c.max_y.max(y);
            labels[i] = dense[root];
        }
    }
    (labels, components)
}

fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

/// Blanks small components confined to the top or bottom band of the image.
pub fn remove_clutter(img: &GrayImage) -> GrayImage {
    remove_clutter_with(img, &ClutterConfig::default())
}

pub fn remove_clutter_with(img: &GrayImage, config: &ClutterConfig) -> GrayImage {
    let (labels, components) = label_components(img, config.eight_connected);
    if components.is_empty() {
        return img.clone();
    }
    let mut areas: Vec<usize> = components.iter().map(|c| c.area).collect();
    let area_limit = config.area_fraction * median(&mut areas);
    let h = img.height() as f64;
    let removed: Vec<bool> = components
        .iter()
        .map(|c| {
            let in_top = (c.max_y + 1) as f64 <= config.margin * h;
            let in_bottom = c.min_y as f64 >= (1.0 - config.margin) * h;
            (in_top || in_bottom) && (c.area as f64) < area_limit
        })
        .collect();
    if !removed.iter().any(|&r| r) {
        return img.clone();
    }
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let l = labels[y * img.width() + x];
            if l != usize::MAX && removed[l] {
                out.set(x, y, BACKGROUND);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    /// Breadth-first flood fill labeler, 8-connected.
    fn flood_fill_components(img: &GrayImage) -> Vec<Vec<(usize, usize)>> {
        let (w, h) = (img.width(), img.height());
        let mut seen = vec![false; w * h];
        let mut out = Vec::new();
        for sy in 0..h {
            for sx in 0..w {
                if seen[sy * w + sx] || !img.is_ink(sx, sy) {
                    continue;
                }
                let mut comp = Vec::new();
                let mut queue = VecDeque::from([(sx, sy)]);
                seen[sy * w + sx] = true;
                while let Some((x, y)) = queue.pop_front() {
                    comp.push((x, y));
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                                continue;
                            }
                            let (nx, ny) = (nx as usize, ny as usize);
                            if !seen[ny * w + nx] && img.is_ink(nx, ny) {
                                seen[ny * w + nx] = true;
                                queue.push_back((nx, ny));
                            }
                        }
                    }
                }
                out.push(comp);
            }
        }
        out
    }

    fn line_with_blob() -> GrayImage {
        // 32 wide, 64 tall; text body in rows 20..44, a 2x2 blob in rows 1..3
        let mut img = GrayImage::filled(32, 64, 255).unwrap();
        for y in 20..44 {
            for x in 4..28 {
                if (x / 3) % 2 == 0 || y % 6 == 0 {
                    img.set(x, y, 0);
                }
            }
        }
        for (x, y) in [(10, 1), (11, 1), (10, 2), (11, 2)] {
            img.set(x, y, 0);
        }
        img
    }

    #[test]
    fn labeler_agrees_with_flood_fill() {
        let img = line_with_blob();
        let (labels, comps) = label_components(&img, true);
        let oracle = flood_fill_components(&img);
        assert_eq!(comps.len(), oracle.len());
        for comp in &oracle {
            let l = labels[comp[0].1 * 32 + comp[0].0];
            assert!(comp.iter().all(|&(x, y)| labels[y * 32 + x] == l));
            assert_eq!(comps[l].area, comp.len());
        }
    }

    #[test]
    fn small_blob_in_top_band_is_removed() {
        let img = line_with_blob();
        let out = remove_clutter(&img);
        let oracle = flood_fill_components(&img);
        for comp in oracle {
            let blob = comp.iter().all(|&(_, y)| y < 3);
            for (x, y) in comp {
                let expected = if blob { 255 } else { img.get(x, y) };
                assert_eq!(out.get(x, y), expected);
            }
        }
        assert_eq!(out.get(10, 1), 255);
    }

    #[test]
    fn single_large_component_is_kept() {
        let mut img = GrayImage::filled(20, 20, 255).unwrap();
        for y in 5..15 {
            for x in 2..18 {
                img.set(x, y, 0);
            }
        }
        assert_eq!(remove_clutter(&img), img);
    }

    #[test]
    fn empty_image_is_unchanged() {
        let img = GrayImage::filled(9, 7, 255).unwrap();
        assert_eq!(remove_clutter(&img), img);
    }
}
