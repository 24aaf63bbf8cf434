//! Ground-truth input: a PAGE-style XML subset, alphabet files and line
//! manifests.
//!
//! Supported XML subset, matched by local name so any namespace works:
//!
//! ```text
//! PcGts
//!   Page @imageFilename
//!     ... TextLine @id              (at any depth below Page)
//!           Coords @points          "x,y x,y ..."
//!           TextEquiv / Unicode     transcription
//! ```
//!
//! Other elements and attributes are ignored.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;

use crate::ctc::Alphabet;
use crate::error::{HtrError, Result};
use crate::imaging::LinePolygon;

/// Garbage symbol used when none is configured.
pub const DEFAULT_GARBAGE: char = '∅';

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageLine {
    pub id: String,
    pub polygon: LinePolygon,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageRecord {
    pub image: String,
    pub lines: Vec<PageLine>,
    /// One message per line that was skipped.
    pub skipped: Vec<String>,
}

fn parse_error(doc: &roxmltree::Document, pos: usize, message: impl Into<String>) -> HtrError {
    let p = doc.text_pos_at(pos);
    HtrError::Parse {
        line: p.row,
        column: p.col,
        message: message.into(),
    }
}

/// Parses `"x,y x,y ..."` into points.
pub fn parse_points(s: &str) -> Result<Vec<(i64, i64)>> {
    s.split_whitespace()
        .map(|pair| {
            let bad = || HtrError::InvalidInput(format!("bad coordinate pair {pair:?}"));
            let (x, y) = pair.split_once(',').ok_or_else(bad)?;
            Ok((x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

fn parse_line(node: roxmltree::Node) -> std::result::Result<PageLine, String> {
    let id = node.attribute("id").ok_or("TextLine without id")?.to_string();
    let points = child(node, "Coords")
        .and_then(|c| c.attribute("points"))
        .ok_or_else(|| format!("line {id}: missing Coords"))?;
    let polygon = parse_points(points)
        .and_then(LinePolygon::new)
        .map_err(|e| format!("line {id}: {e}"))?;
    let text = child(node, "TextEquiv")
        .and_then(|t| child(t, "Unicode"))
        .map(|u| u.text().unwrap_or_default().to_string())
        .ok_or_else(|| format!("line {id}: missing transcription"))?;
    Ok(PageLine { id, polygon, text })
}

/// Parses one page. Lines with missing or invalid coordinates, missing
/// transcriptions or repeated ids are skipped and reported in
/// [`PageRecord::skipped`].
pub fn parse_page(xml: &str) -> Result<PageRecord> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| {
        let p = e.pos();
        HtrError::Parse {
            line: p.row,
            column: p.col,
            message: e.to_string(),
        }
    })?;
    let page = doc
        .descendants()
        .find(|n| n.is_element() && n.tag_name().name() == "Page")
        .ok_or_else(|| parse_error(&doc, 0, "no Page element"))?;
    let image = page
        .attribute("imageFilename")
        .ok_or_else(|| parse_error(&doc, page.range().start, "Page without imageFilename"))?
        .to_string();
    let mut record = PageRecord {
        image,
        lines: Vec::new(),
        skipped: Vec::new(),
    };
    let mut ids = HashSet::new();
    for node in page.descendants().filter(|n| n.is_element() && n.tag_name().name() == "TextLine") {
        let outcome = parse_line(node).and_then(|line| {
            if ids.insert(line.id.clone()) {
                Ok(line)
            } else {
                Err(format!("line {}: duplicate id", line.id))
            }
        });
        match outcome {
            Ok(line) => record.lines.push(line),
            Err(msg) => {
                warn!("{msg}; line skipped");
                record.skipped.push(msg);
            }
        }
    }
    Ok(record)
}

pub fn read_page(path: &Path) -> Result<PageRecord> {
    let xml = std::fs::read_to_string(path).map_err(|e| HtrError::io(path, e))?;
    parse_page(&xml)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Serializes the supported subset; [`parse_page`] reads it back unchanged.
pub fn write_page(record: &PageRecord) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<PcGts xmlns=\"http://schema.primaresearch.org/PAGE/gts/pagecontent/2013-07-15\">\n");
    writeln!(s, "  <Page imageFilename=\"{}\">", escape(&record.image)).unwrap();
    s.push_str("    <TextRegion id=\"r1\">\n");
    for line in &record.lines {
        let points: Vec<String> = line.polygon.points().iter().map(|(x, y)| format!("{x},{y}")).collect();
        writeln!(s, "      <TextLine id=\"{}\">", escape(&line.id)).unwrap();
        writeln!(s, "        <Coords points=\"{}\"/>", points.join(" ")).unwrap();
        writeln!(s, "        <TextEquiv><Unicode>{}</Unicode></TextEquiv>", escape(&line.text)).unwrap();
        s.push_str("      </TextLine>\n");
    }
    s.push_str("    </TextRegion>\n  </Page>\n</PcGts>\n");
    s
}

/// Garbage symbol first, then space, then every other corpus character in
/// code-point order.
pub fn build_alphabet<S: AsRef<str>>(transcriptions: &[S], garbage: char) -> Result<Alphabet> {
    if transcriptions.is_empty() {
        return Err(HtrError::Config("cannot build an alphabet from no transcriptions".into()));
    }
    let chars: BTreeSet<char> = transcriptions.iter().flat_map(|t| t.as_ref().chars()).collect();
    if chars.contains(&garbage) || garbage == ' ' {
        return Err(HtrError::Config(format!("garbage symbol {garbage:?} occurs in the corpus")));
    }
    let mut symbols = vec![garbage, ' '];
    symbols.extend(chars.into_iter().filter(|&c| c != ' '));
    Alphabet::new(symbols, 0)
}

/// One symbol per line, garbage symbol first.
pub fn alphabet_to_string(alphabet: &Alphabet) -> String {
    let mut symbols = vec![alphabet.symbol(alphabet.garbage())];
    symbols.extend(
        alphabet
            .symbols()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != alphabet.garbage())
            .map(|(_, &c)| c),
    );
    symbols.iter().map(|c| format!("{c}\n")).collect()
}

pub fn parse_alphabet(text: &str) -> Result<Alphabet> {
    let mut symbols = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        let mut it = line.chars();
        match (it.next(), it.next()) {
            (Some(c), None) => symbols.push(c),
            (None, _) if i + 1 == text.split('\n').count() => {}
            _ => {
                return Err(HtrError::Parse {
                    line: i as u32 + 1,
                    column: 1,
                    message: format!("alphabet lines hold exactly one character, got {line:?}"),
                })
            }
        }
    }
    Alphabet::new(symbols, 0)
}

pub fn read_alphabet(path: &Path) -> Result<Alphabet> {
    parse_alphabet(&std::fs::read_to_string(path).map_err(|e| HtrError::io(path, e))?)
}

pub fn write_alphabet(path: &Path, alphabet: &Alphabet) -> Result<()> {
    std::fs::write(path, alphabet_to_string(alphabet)).map_err(|e| HtrError::io(path, e))
}

/// A manifest row: `id<TAB>image-path<TAB>transcription`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    pub text: String,
}

/// Relative image paths are resolved against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (Some(id), Some(image), Some(text)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(HtrError::Parse {
                line: i as u32 + 1,
                column: 1,
                message: "manifest rows need three tab-separated fields".into(),
            });
        };
        let image = Path::new(image);
        out.push(ManifestEntry {
            id: id.to_string(),
            image: if image.is_absolute() { image.to_path_buf() } else { base.join(image) },
            text: text.to_string(),
        });
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| HtrError::io(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Image paths are written relative to `base` when they lie below it.
pub fn manifest_to_string(entries: &[ManifestEntry], base: &Path) -> Result<String> {
    let mut s = String::new();
    for e in entries {
        let image = e.image.strip_prefix(base).unwrap_or(&e.image).to_string_lossy().into_owned();
        for field in [&e.id, &image, &e.text] {
            if field.contains(['\t', '\n', '\r']) {
                return Err(HtrError::InvalidInput(format!("manifest field {field:?} contains a tab or newline")));
            }
        }
        writeln!(s, "{}\t{}\t{}", e.id, image, e.text).unwrap();
    }
    Ok(s)
}
