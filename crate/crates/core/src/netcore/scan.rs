use crate::imaging::GrayImage;

/// One of the four column-first traversal orders of a 2-D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Direction {
    /// Columns visited right to left.
    pub right_to_left: bool,
    /// Rows within a column visited bottom to top.
    pub bottom_up: bool,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction { right_to_left: false, bottom_up: false },
        Direction { right_to_left: false, bottom_up: true },
        Direction { right_to_left: true, bottom_up: false },
        Direction { right_to_left: true, bottom_up: true },
    ];

    /// Grid position of the `(xc, yc)`-th step in this direction's frame.
    #[inline]
    pub fn position(self, xc: usize, yc: usize, width: usize, height: usize) -> (usize, usize) {
        let x = if self.right_to_left { width - 1 - xc } else { xc };
        let y = if self.bottom_up { height - 1 - yc } else { yc };
        (x, y)
    }

    /// All `(x, y)` positions in visiting order: column by column, each
    /// column traversed fully before the next.
    pub fn order(self, width: usize, height: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(width * height);
        for xc in 0..width {
            for yc in 0..height {
                out.push(self.position(xc, yc, width, height));
            }
        }
        out
    }
}

/// The four traversal orders of an image's pixels, in [`Direction::ALL`]
/// order.
pub fn directional_scan(img: &GrayImage) -> [Vec<(usize, usize)>; 4] {
    Direction::ALL.map(|d| d.order(img.width(), img.height()))
}
