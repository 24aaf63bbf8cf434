//! Synthetic handwriting stand-in: a small bitmap font with ascenders and
//! descenders, used to render fixture lines and pages.

use crate::error::{HtrError, Result};
use crate::imaging::{GrayImage, LinePolygon, BACKGROUND};
use crate::pageio::{PageLine, PageRecord};

/// Font rows: 2 ascender, 5 x-height, 2 descender.
pub const GLYPH_ROWS: usize = 9;

const GLYPHS: &[(char, [&str; GLYPH_ROWS])] = &[
    ('a', [".....", ".....", ".###.", "....#", ".####", "#...#", ".####", ".....", "....."]),
    ('b', ["#....", "#....", "####.", "#...#", "#...#", "#...#", "####.", ".....", "....."]),
    ('c', [".....", ".....", ".###.", "#....", "#....", "#....", ".###.", ".....", "....."]),
    ('d', ["....#", "....#", ".####", "#...#", "#...#", "#...#", ".####", ".....", "....."]),
    ('e', [".....", ".....", ".###.", "#...#", "#####", "#....", ".###.", ".....", "....."]),
    ('f', ["..##.", ".#...", "###..", ".#...", ".#...", ".#...", ".#...", ".....", "....."]),
    ('g', [".....", ".....", ".####", "#...#", "#...#", "#...#", ".####", "....#", ".###."]),
    ('h', ["#....", "#....", "####.", "#...#", "#...#", "#...#", "#...#", ".....", "....."]),
    ('i', [".....", "..#..", ".....", ".##..", "..#..", "..#..", ".###.", ".....", "....."]),
    ('j', [".....", "...#.", ".....", "..##.", "...#.", "...#.", "...#.", "#..#.", ".##.."]),
    ('k', ["#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#.", ".....", "....."]),
    ('l', [".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###.", ".....", "....."]),
    ('m', [".....", ".....", "##.#.", "#.#.#", "#.#.#", "#.#.#", "#.#.#", ".....", "....."]),
    ('n', [".....", ".....", "####.", "#...#", "#...#", "#...#", "#...#", ".....", "....."]),
    ('o', [".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###.", ".....", "....."]),
    ('p', [".....", ".....", "####.", "#...#", "#...#", "#...#", "####.", "#....", "#...."]),
    ('q', [".....", ".....", ".####", "#...#", "#...#", "#...#", ".####", "....#", "....#"]),
    ('r', [".....", ".....", "#.##.", "##...", "#....", "#....", "#....", ".....", "....."]),
    ('s', [".....", ".....", ".####", "#....", ".###.", "....#", "####.", ".....", "....."]),
    ('t', [".#...", ".#...", "####.", ".#...", ".#...", ".#...", "..##.", ".....", "....."]),
    ('u', [".....", ".....", "#...#", "#...#", "#...#", "#...#", ".####", ".....", "....."]),
    ('v', [".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#..", ".....", "....."]),
    ('w', [".....", ".....", "#...#", "#...#", "#.#.#", "#.#.#", ".#.#.", ".....", "....."]),
    ('x', [".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", ".....", "....."]),
    ('y', [".....", ".....", "#...#", "#...#", "#...#", "#...#", ".####", "....#", ".###."]),
    ('z', [".....", ".....", "#####", "...#.", "..#..", ".#...", "#####", ".....", "....."]),
    ('.', ["..", "..", "..", "..", "..", "##", "##", "..", ".."]),
    (',', ["..", "..", "..", "..", "..", "##", "##", ".#", "#."]),
];

/// Blank cells between the glyphs around a space.
pub const SPACE_CELLS: usize = 3;
/// Gap between adjacent glyphs in font cells.
pub const LETTER_GAP_CELLS: usize = 1;

/// Characters the font can render, space included.
pub fn font_chars() -> Vec<char> {
    let mut v: Vec<char> = GLYPHS.iter().map(|g| g.0).collect();
    v.push(' ');
    v
}

fn glyph(c: char) -> Option<&'static [&'static str; GLYPH_ROWS]> {
    GLYPHS.iter().find(|g| g.0 == c).map(|g| &g.1)
}

/// Rendering geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderConfig {
    /// Pixels per font cell.
    pub scale: usize,
    /// Blank pixels around the text.
    pub margin: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { scale: 2, margin: 6 }
    }
}

/// Renders one line of text, black ink on white.
pub fn render_line(text: &str, cfg: RenderConfig) -> Result<GrayImage> {
    let mut cells = Vec::new();
    let mut after_glyph = false;
    for c in text.chars() {
        if c == ' ' {
            cells.extend(std::iter::repeat_n(None, SPACE_CELLS));
            after_glyph = false;
            continue;
        }
        let g = glyph(c).ok_or_else(|| HtrError::InvalidInput(format!("no glyph for {c:?}")))?;
        if after_glyph {
            cells.extend(std::iter::repeat_n(None, LETTER_GAP_CELLS));
        }
        after_glyph = true;
        for col in 0..g[0].len() {
            cells.push(Some((g, col)));
        }
    }
    let s = cfg.scale.max(1);
    let width = cells.len() * s + 2 * cfg.margin;
    let height = GLYPH_ROWS * s + 2 * cfg.margin;
    let mut img = GrayImage::filled(width.max(1), height, BACKGROUND)?;
    for (cx, cell) in cells.iter().enumerate() {
        let Some((g, col)) = cell else { continue };
        for (row, bits) in g.iter().enumerate() {
            if bits.as_bytes()[*col] != b'#' {
                continue;
            }
            for dy in 0..s {
                for dx in 0..s {
                    img.set(cfg.margin + cx * s + dx, cfg.margin + row * s + dy, 0);
                }
            }
        }
    }
    Ok(img)
}

/// Renders lines stacked vertically on one page; each line polygon is the
/// rectangle of its rendered line image.
pub fn render_page(image_name: &str, lines: &[(&str, &str)], cfg: RenderConfig) -> Result<(GrayImage, PageRecord)> {
    let rendered = lines
        .iter()
        .map(|(_, text)| render_line(text, cfg))
        .collect::<Result<Vec<_>>>()?;
    let pad = 4 * cfg.scale;
    let width = rendered.iter().map(|r| r.width()).max().unwrap_or(1) + 2 * pad;
    let height = rendered.iter().map(|r| r.height()).sum::<usize>() + pad * (rendered.len() + 1);
    let mut page = GrayImage::filled(width, height.max(1), BACKGROUND)?;
    let mut record = PageRecord {
        image: image_name.to_string(),
        lines: Vec::new(),
        skipped: Vec::new(),
    };
    let mut y0 = pad;
    for ((id, text), img) in lines.iter().zip(&rendered) {
        for y in 0..img.height() {
            for x in 0..img.width() {
                page.set(pad + x, y0 + y, img.get(x, y));
            }
        }
        let (x1, y1) = ((pad + img.width() - 1) as i64, (y0 + img.height() - 1) as i64);
        let (x0, top) = (pad as i64, y0 as i64);
        record.lines.push(PageLine {
            id: id.to_string(),
            polygon: LinePolygon::new(vec![(x0, top), (x1, top), (x1, y1), (x0, y1)])?,
            text: text.to_string(),
        });
        y0 += img.height() + pad;
    }
    Ok((page, record))
}

/// Transcriptions of the bundled fixture corpus: (page, line id, text).
pub const FIXTURE_LINES: [(&str, &str, &str); 10] = [
    ("page01", "l01", "the cat"),
    ("page01", "l02", "red fox."),
    ("page02", "l03", "jump"),
    ("page02", "l04", "lazy dog"),
    ("page03", "l05", "quiz"),
    ("page03", "l06", "wheel"),
    ("page04", "l07", "pack my"),
    ("page04", "l08", "box"),
    ("page05", "l09", "vexing"),
    ("page05", "l10", "glyph,"),
];

/// Words of the fixture transcriptions, without punctuation.
pub fn fixture_words() -> Vec<String> {
    let mut words: Vec<String> = FIXTURE_LINES
        .iter()
        .flat_map(|(_, _, t)| t.split(' '))
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_string())
        .filter(|w| !w.is_empty())
        .collect();
    words.sort();
    words.dedup();
    words
}

/// Writes the fixture pages (`pageNN.png` + `pageNN.xml`) and
/// `dictionary.txt` into `dir`.
pub fn write_fixture_corpus(dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HtrError::io(dir, e))?;
    let mut pages: Vec<&str> = FIXTURE_LINES.iter().map(|l| l.0).collect();
    pages.dedup();
    for page in pages {
        let lines: Vec<(&str, &str)> = FIXTURE_LINES.iter().filter(|l| l.0 == page).map(|l| (l.1, l.2)).collect();
        let image_name = format!("{page}.png");
        let (img, record) = render_page(&image_name, &lines, RenderConfig::default())?;
        img.save_png(&dir.join(&image_name))?;
        let xml_path = dir.join(format!("{page}.xml"));
        std::fs::write(&xml_path, crate::pageio::write_page(&record)).map_err(|e| HtrError::io(&xml_path, e))?;
    }
    let dict_path = dir.join("dictionary.txt");
    let dict: String = fixture_words().iter().map(|w| format!("{w}\n")).collect();
    std::fs::write(&dict_path, dict).map_err(|e| HtrError::io(&dict_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glyphs_are_rectangular_and_inked() {
        for (c, rows) in GLYPHS {
            assert!(rows.iter().all(|r| r.len() == rows[0].len()), "{c}");
            assert!(rows.iter().any(|r| r.contains('#')), "{c}");
        }
        let mut shapes: Vec<_> = GLYPHS.iter().map(|g| g.1).collect();
        shapes.sort();
        shapes.dedup();
        assert_eq!(shapes.len(), GLYPHS.len());
    }

    #[test]
    fn line_geometry() {
        let cfg = RenderConfig { scale: 2, margin: 3 };
        let img = render_line("ab c", cfg).unwrap();
        // a(5) gap b(5) space(3) c(5)
        assert_eq!(img.width(), (5 + 1 + 5 + 3 + 5) * 2 + 6);
        assert_eq!(img.height(), 9 * 2 + 6);
        assert!(render_line("A", cfg).is_err());
    }

    #[test]
    fn page_polygons_cover_their_lines() {
        let (page, rec) = render_page("p.png", &[("a", "ab"), ("b", "cd.")], RenderConfig::default()).unwrap();
        assert_eq!(rec.lines.len(), 2);
        let ink_inside: usize = rec
            .lines
            .iter()
            .map(|l| crate::imaging::extract_line(&page, &l.polygon).unwrap().ink_count())
            .sum();
        assert_eq!(ink_inside, page.ink_count());
    }

    #[test]
    fn fixture_lines_fit_the_font() {
        let chars = font_chars();
        for (_, _, t) in FIXTURE_LINES {
            assert!((3..=8).contains(&t.chars().count()), "{t}");
            assert!(t.chars().all(|c| chars.contains(&c)));
        }
    }
}
