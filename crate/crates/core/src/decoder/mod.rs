//! Dictionary-constrained decoding of confidence matrices.
//!
//! Every hypothesis is rated by the length-penalized cost
//! `-ln p(w | matrix) + alpha * |w|`, where `p` is the CTC probability and
//! `|w|` the character count; lower is better. A line is partitioned into
//! word-like and special-character segments. Each word-like segment is
//! decoded three ways (best single dictionary word, best pair of dictionary
//! words, raw best path) and the cheapest result is kept.

mod dictionary;
mod partition;
mod tokenize;

use std::cmp::Ordering;

pub use dictionary::Dictionary;
pub use partition::{partition, Segment, SegmentKind};
pub use tokenize::scoring_tokenize;

use crate::ctc::{best_path_labels, collapse, ctc_loss, Alphabet, LabelSequence};
use crate::error::{HtrError, Result};
use crate::matrix::ConfidenceMatrix;

pub const DEFAULT_ALPHA: f64 = 0.15;
pub const DEFAULT_THRESHOLD: f64 = 0.8;
pub const DEFAULT_MIN_RUN: usize = 2;
pub const DEFAULT_SPECIALS: &str = ".,;:!?'\"()[]-‘’“”„";

/// Costs closer than this (relative) count as equal.
const COST_TOLERANCE: f64 = 1e-12;

pub(crate) fn compare_costs(a: f64, b: f64) -> Ordering {
    if a == b {
        return Ordering::Equal;
    }
    if a.is_infinite() || b.is_infinite() {
        return a.total_cmp(&b);
    }
    if (a - b).abs() <= COST_TOLERANCE * a.abs().max(b.abs()).max(1.0) {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderConfig {
    /// Weight of the per-character penalty; nonnegative.
    pub alpha: f64,
    /// Minimum space plus garbage probability of a separator frame.
    pub threshold: f64,
    /// Minimum length of an interior separator run that splits words.
    pub min_run: usize,
    /// Characters treated as punctuation; those missing from the alphabet
    /// are ignored.
    pub specials: Vec<char>,
    /// Trie nodes kept per depth; `None` searches exhaustively.
    pub beam: Option<usize>,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            alpha: DEFAULT_ALPHA,
            threshold: DEFAULT_THRESHOLD,
            min_run: DEFAULT_MIN_RUN,
            specials: DEFAULT_SPECIALS.chars().collect(),
            beam: None,
        }
    }
}

impl DecoderConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        DecoderConfig {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HtrError::Config(m));
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("alpha must be finite and nonnegative, got {}", self.alpha));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return bad(format!("separator threshold must lie in (0, 1], got {}", self.threshold));
        }
        if self.min_run == 0 {
            return bad("minimum separator run must be at least 1".into());
        }
        if let Some(c) = self.specials.iter().find(|c| c.is_alphanumeric() || c.is_whitespace()) {
            return bad(format!("special character set may not contain {c:?}"));
        }
        if self.beam == Some(0) {
            return bad("beam width must be positive".into());
        }
        Ok(())
    }

    /// Alphabet classes of the special characters, ascending.
    pub fn special_classes(&self, alphabet: &Alphabet) -> Vec<usize> {
        let mut v: Vec<usize> = self.specials.iter().filter_map(|&c| alphabet.class_of(c)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Where a segment transcription came from, in tie-break preference order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    OneWord,
    TwoWords,
    BestPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub text: String,
    /// Length-penalized cost; `+inf` when infeasible.
    pub cost: f64,
    pub source: Source,
}

impl Hypothesis {
    fn infeasible(source: Source) -> Self {
        Hypothesis {
            text: String::new(),
            cost: f64::INFINITY,
            source,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.cost.is_finite()
    }

    /// Total order used for selection: cost, then source preference, then
    /// text.
    pub fn rank(&self, other: &Hypothesis) -> Ordering {
        compare_costs(self.cost, other.cost)
            .then(self.source.cmp(&other.source))
            .then_with(|| self.text.cmp(&other.text))
    }
}

/// The best-ranked hypothesis, or `None` for an empty input.
pub fn select(candidates: impl IntoIterator<Item = Hypothesis>) -> Option<Hypothesis> {
    candidates
        .into_iter()
        .fold(None, |best: Option<Hypothesis>, h| match best {
            Some(b) if b.rank(&h) != Ordering::Greater => Some(b),
            _ => Some(h),
        })
}

fn check_classes(matrix: &ConfidenceMatrix, alphabet: &Alphabet) -> Result<()> {
    if matrix.classes() != alphabet.len() {
        return Err(HtrError::Shape(format!(
            "matrix has {} classes, alphabet has {}",
            matrix.classes(),
            alphabet.len()
        )));
    }
    Ok(())
}

fn label_cost(labels: &[usize], matrix: &ConfidenceMatrix, blank: usize, alpha: f64) -> Result<f64> {
    let seq = LabelSequence::new(labels.to_vec(), blank, matrix.classes())?;
    match ctc_loss(matrix, &seq) {
        Ok(loss) => Ok(loss + alpha * labels.len() as f64),
        Err(HtrError::InfeasibleTarget { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Cost of `word` over `matrix`: `-ln p(word | matrix) + alpha * |word|`.
/// `+inf` when the matrix is too short for the word.
pub fn score(word: &str, matrix: &ConfidenceMatrix, alphabet: &Alphabet, alpha: f64) -> Result<f64> {
    check_classes(matrix, alphabet)?;
    let seq = alphabet.encode(word)?;
    label_cost(seq.labels(), matrix, alphabet.garbage(), alpha)
}

fn require_words(dict: &Dictionary) -> Result<()> {
    if dict.is_empty() {
        return Err(HtrError::Config("dictionary is empty".into()));
    }
    Ok(())
}

/// The dictionary word of least cost over the whole matrix.
pub fn decode_one_word(matrix: &ConfidenceMatrix, dict: &Dictionary, config: &DecoderConfig) -> Result<Hypothesis> {
    require_words(dict)?;
    check_classes(matrix, dict.alphabet())?;
    let ends = dict.best_prefix_words(matrix, config.alpha, config.beam);
    Ok(match ends.last().copied().flatten() {
        Some(c) => Hypothesis {
            text: dict.word(c.word).to_string(),
            cost: c.cost,
            source: Source::OneWord,
        },
        None => Hypothesis::infeasible(Source::OneWord),
    })
}

/// The pair of dictionary words and split point `t` minimizing
/// `cost(w1, [0, t)) + cost(w2, [t, T))`; the words are joined by a space.
pub fn decode_two_words(matrix: &ConfidenceMatrix, dict: &Dictionary, config: &DecoderConfig) -> Result<Hypothesis> {
    require_words(dict)?;
    check_classes(matrix, dict.alphabet())?;
    let t_len = matrix.timesteps();
    let prefix = dict.best_prefix_words(matrix, config.alpha, config.beam);
    let suffix = dict.best_suffix_words(matrix, config.alpha, config.beam);
    let mut best = Hypothesis::infeasible(Source::TwoWords);
    for t in 1..t_len {
        let (Some(a), Some(b)) = (prefix[t], suffix[t_len - t]) else {
            continue;
        };
        let h = Hypothesis {
            text: format!("{} {}", dict.word(a.word), dict.word(b.word)),
            cost: a.cost + b.cost,
            source: Source::TwoWords,
        };
        if h.rank(&best) == Ordering::Less {
            best = h;
        }
    }
    Ok(best)
}

/// Best-path transcription rated with the same cost as dictionary words.
pub fn decode_best_path(matrix: &ConfidenceMatrix, alphabet: &Alphabet, config: &DecoderConfig) -> Result<Hypothesis> {
    check_classes(matrix, alphabet)?;
    if matrix.timesteps() == 0 {
        return Ok(Hypothesis::infeasible(Source::BestPath));
    }
    let labels = best_path_labels(matrix, alphabet.garbage());
    Ok(Hypothesis {
        text: alphabet.decode(&labels),
        cost: label_cost(&labels, matrix, alphabet.garbage(), config.alpha)?,
        source: Source::BestPath,
    })
}

/// Cheapest of the one-word, two-word and best-path hypotheses. An empty
/// dictionary leaves only the best path.
pub fn decode_segment(matrix: &ConfidenceMatrix, dict: &Dictionary, config: &DecoderConfig) -> Result<Hypothesis> {
    let mut candidates = Vec::with_capacity(3);
    if !dict.is_empty() {
        candidates.push(decode_one_word(matrix, dict, config)?);
        candidates.push(decode_two_words(matrix, dict, config)?);
    }
    candidates.push(decode_best_path(matrix, dict.alphabet(), config)?);
    Ok(select(candidates).expect("best path is always present"))
}

/// Best path restricted to the special characters and garbage.
fn decode_special(matrix: &ConfidenceMatrix, alphabet: &Alphabet, specials: &[usize]) -> String {
    let blank = alphabet.garbage();
    let path = (0..matrix.timesteps()).map(|t| {
        let row = matrix.row(t);
        let mut best = blank;
        for &c in specials {
            if row[c] > row[best] || (row[c] == row[best] && c < best) {
                best = c;
            }
        }
        best
    });
    alphabet.decode(&collapse(path, blank))
}

/// Decodes a whole line: words separated by single spaces, special
/// characters attached without spaces to the nearer word segment (the left
/// one on ties).
pub fn decode_line(matrix: &ConfidenceMatrix, dict: &Dictionary, config: &DecoderConfig) -> Result<String> {
    let alphabet = dict.alphabet();
    check_classes(matrix, alphabet)?;
    let segments = partition(matrix, alphabet, config);
    let specials = config.special_classes(alphabet);
    let mut texts = Vec::with_capacity(segments.len());
    for s in &segments {
        let sub = matrix.slice(s.start, s.end);
        texts.push(match s.kind {
            SegmentKind::Word => decode_segment(&sub, dict, config)?.text,
            SegmentKind::Special => decode_special(&sub, alphabet, &specials),
        });
    }

    let words: Vec<usize> = (0..segments.len()).filter(|&i| segments[i].kind == SegmentKind::Word).collect();
    if words.is_empty() {
        return Ok(join_nonempty(texts));
    }
    let mut prefixes = vec![String::new(); segments.len()];
    let mut suffixes = vec![String::new(); segments.len()];
    for (i, s) in segments.iter().enumerate() {
        if s.kind != SegmentKind::Special {
            continue;
        }
        let left = words.iter().rev().find(|&&w| w < i).copied();
        let right = words.iter().find(|&&w| w > i).copied();
        let attach_left = match (left, right) {
            (Some(l), Some(r)) => s.start - segments[l].end <= segments[r].start - s.end,
            (Some(_), None) => true,
            _ => false,
        };
        if attach_left {
            suffixes[left.unwrap()].push_str(&texts[i]);
        } else {
            // specials before the same word keep their order
            prefixes[right.unwrap()].push_str(&texts[i]);
        }
    }
    Ok(join_nonempty(
        words.iter().map(|&w| format!("{}{}{}", prefixes[w], texts[w], suffixes[w])),
    ))
}

fn join_nonempty(parts: impl IntoIterator<Item = String>) -> String {
    parts.into_iter().filter(|p| !p.is_empty()).collect::<Vec<_>>().join(" ")
}
