//! Conservative split of a line matrix into word-like and
//! special-character segments.

use crate::ctc::Alphabet;
use crate::matrix::ConfidenceMatrix;

use super::DecoderConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentKind {
    Word,
    Special,
}

/// Half-open timestep range `[start, end)` of a line matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Splits the time axis into ordered, disjoint segments.
///
/// A frame is a separator when its space plus garbage probability reaches
/// the threshold. Separator runs at either end of the line are dropped;
/// interior runs become gaps only when they last at least `min_run` frames
/// and space is the most probable class somewhere inside, because plain
/// garbage runs also occur between the letters of one word. Special
/// characters whose frames lie before the first or after the last letter of
/// a region are split off into their own segments.
pub fn partition(matrix: &ConfidenceMatrix, alphabet: &Alphabet, config: &DecoderConfig) -> Vec<Segment> {
    let t_len = matrix.timesteps();
    let blank = alphabet.garbage();
    let space = alphabet.space();
    let argmax: Vec<usize> = (0..t_len).map(|t| matrix.argmax(t)).collect();
    let sep: Vec<bool> = (0..t_len)
        .map(|t| matrix.get(t, blank) + space.map_or(0.0, |s| matrix.get(t, s)) >= config.threshold)
        .collect();

    let mut regions = Vec::new();
    let mut region_start = None;
    let mut t = 0;
    while t < t_len {
        if !sep[t] {
            region_start.get_or_insert(t);
            t += 1;
            continue;
        }
        let run_start = t;
        while t < t_len && sep[t] {
            t += 1;
        }
        let edge = run_start == 0 || t == t_len;
        let spaced = argmax[run_start..t].iter().any(|&c| Some(c) == space);
        if edge || (t - run_start >= config.min_run && spaced) {
            if let Some(s) = region_start.take() {
                regions.push((s, run_start));
            }
        } else {
            region_start.get_or_insert(run_start);
        }
    }
    if let Some(s) = region_start {
        regions.push((s, t_len));
    }

    let special = config.special_classes(alphabet);
    let is_special = |c: usize| special.contains(&c);
    let is_letter = |c: usize| c != blank && Some(c) != space && !is_special(c);
    let mut out = Vec::new();
    for (s, e) in regions {
        let frames = &argmax[s..e];
        let seg = |start, end, kind| Segment { start, end, kind };
        let Some(first) = frames.iter().position(|&c| is_letter(c)) else {
            let kind = if frames.iter().any(|&c| is_special(c)) {
                SegmentKind::Special
            } else {
                SegmentKind::Word
            };
            out.push(seg(s, e, kind));
            continue;
        };
        let last = frames.iter().rposition(|&c| is_letter(c)).unwrap();
        let mut word_start = s;
        if let Some(p) = frames[..first].iter().rposition(|&c| is_special(c)) {
            out.push(seg(s, s + p + 1, SegmentKind::Special));
            word_start = s + p + 1;
        }
        match frames[last + 1..].iter().position(|&c| is_special(c)) {
            Some(q) => {
                let split = s + last + 1 + q;
                out.push(seg(word_start, split, SegmentKind::Word));
                out.push(seg(split, e, SegmentKind::Special));
            }
            None => out.push(seg(word_start, e, SegmentKind::Word)),
        }
    }
    out
}
