//! Word and character error rates.
//!
//! Both texts of a pair are normalized with
//! [`scoring_tokenize`](crate::decoder::scoring_tokenize) first. Words are the
//! space-separated tokens of the result, characters are its code points
//! including spaces. Corpus rates divide total edits by total reference
//! length.

use std::fmt::Write as _;

use crate::decoder::scoring_tokenize;
use crate::error::{HtrError, Result};

/// Edit operations of one minimal alignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EditCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl EditCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

impl std::ops::AddAssign for EditCounts {
    fn add_assign(&mut self, o: Self) {
        self.substitutions += o.substitutions;
        self.insertions += o.insertions;
        self.deletions += o.deletions;
    }
}

/// Unit-cost Levenshtein alignment of `hyp` against `reference`.
///
/// Among alignments of minimal total cost the backtrace prefers, at every
/// step, a diagonal move (match or substitution), then a deletion, then an
/// insertion.
pub fn edit_distance<T: PartialEq>(reference: &[T], hyp: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = diag.min(del).min(ins);
        }
    }
    let mut counts = EditCounts::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hyp[j - 1];
            if d[(i - 1) * w + j - 1] + usize::from(!same) == here {
                counts.substitutions += usize::from(!same);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

/// Counts for one reference/hypothesis pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineEdits {
    pub edits: EditCounts,
    pub reference_len: usize,
}

/// Per-line and aggregate edit statistics at one granularity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateReport {
    pub lines: Vec<LineEdits>,
    pub totals: EditCounts,
    pub reference_len: usize,
}

impl RateReport {
    /// `100 * total edits / total reference length`.
    pub fn percent(&self) -> Result<f64> {
        if self.reference_len == 0 {
            return Err(HtrError::UndefinedMetric("reference is empty".into()));
        }
        Ok(100.0 * self.totals.total() as f64 / self.reference_len as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Word,
    Char,
}

fn units(text: &str, unit: Unit) -> Vec<String> {
    let norm = scoring_tokenize(text);
    match unit {
        Unit::Word => norm.split(' ').filter(|w| !w.is_empty()).map(str::to_string).collect(),
        Unit::Char => norm.chars().map(String::from).collect(),
    }
}

fn rate_report<R: AsRef<str>, H: AsRef<str>>(refs: &[R], hyps: &[H], unit: Unit) -> Result<RateReport> {
    if refs.len() != hyps.len() {
        return Err(HtrError::InvalidInput(format!(
            "{} reference lines but {} hypothesis lines",
            refs.len(),
            hyps.len()
        )));
    }
    let mut report = RateReport {
        lines: Vec::with_capacity(refs.len()),
        totals: EditCounts::default(),
        reference_len: 0,
    };
    for (r, h) in refs.iter().zip(hyps) {
        let (r, h) = (units(r.as_ref(), unit), units(h.as_ref(), unit));
        let edits = edit_distance(&r, &h);
        report.totals += edits;
        report.reference_len += r.len();
        report.lines.push(LineEdits {
            edits,
            reference_len: r.len(),
        });
    }
    Ok(report)
}

pub fn word_report<R: AsRef<str>, H: AsRef<str>>(refs: &[R], hyps: &[H]) -> Result<RateReport> {
    rate_report(refs, hyps, Unit::Word)
}

pub fn char_report<R: AsRef<str>, H: AsRef<str>>(refs: &[R], hyps: &[H]) -> Result<RateReport> {
    rate_report(refs, hyps, Unit::Char)
}

/// Word error rate in percent.
pub fn wer<R: AsRef<str>, H: AsRef<str>>(refs: &[R], hyps: &[H]) -> Result<f64> {
    word_report(refs, hyps)?.percent()
}

/// Character error rate in percent; spaces count as characters.
pub fn cer<R: AsRef<str>, H: AsRef<str>>(refs: &[R], hyps: &[H]) -> Result<f64> {
    char_report(refs, hyps)?.percent()
}

/// Word and character statistics for one corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    pub words: RateReport,
    pub chars: RateReport,
}

impl EvalReport {
    pub fn new<R: AsRef<str>, H: AsRef<str>>(refs: &[R], hyps: &[H]) -> Result<Self> {
        Ok(EvalReport {
            words: word_report(refs, hyps)?,
            chars: char_report(refs, hyps)?,
        })
    }

    fn summary_rows(&self) -> Result<[(&'static str, f64, &RateReport); 2]> {
        Ok([("WER", self.words.percent()?, &self.words), ("CER", self.chars.percent()?, &self.chars)])
    }

    /// Human-readable summary with two-decimal percentages.
    pub fn to_text(&self) -> Result<String> {
        let mut s = String::new();
        for (name, pct, r) in self.summary_rows()? {
            let e = r.totals;
            writeln!(
                s,
                "{name} {pct:.2}% ({} edits / {} reference: {} sub, {} ins, {} del)",
                e.total(),
                r.reference_len,
                e.substitutions,
                e.insertions,
                e.deletions
            )
            .unwrap();
        }
        Ok(s)
    }

    /// Line-oriented `key=value` form for tooling.
    pub fn to_key_values(&self) -> Result<String> {
        let mut s = String::new();
        writeln!(s, "lines={}", self.words.lines.len()).unwrap();
        for (name, pct, r) in self.summary_rows()? {
            let p = name.to_ascii_lowercase();
            let e = r.totals;
            writeln!(s, "{p}={pct:.2}").unwrap();
            writeln!(s, "{p}.reference={}", r.reference_len).unwrap();
            writeln!(s, "{p}.substitutions={}", e.substitutions).unwrap();
            writeln!(s, "{p}.insertions={}", e.insertions).unwrap();
            writeln!(s, "{p}.deletions={}", e.deletions).unwrap();
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<&str> {
        s.split(' ').collect()
    }

    #[test]
    fn edit_examples() {
        assert_eq!(edit_distance(&words("a b c"), &words("a b c")), EditCounts::default());
        let e = edit_distance(&words("a b c"), &words("a x c"));
        assert_eq!((e.substitutions, e.insertions, e.deletions), (1, 0, 0));
        let e = edit_distance(&['a', 'b'], &['a', 'b', 'c']);
        assert_eq!((e.substitutions, e.insertions, e.deletions), (0, 1, 0));
        let e = edit_distance(&['a', 'b', 'c'], &[]);
        assert_eq!((e.substitutions, e.insertions, e.deletions), (0, 0, 3));
    }

    #[test]
    fn rates() {
        assert_eq!(wer(&["a b"], &["a b"]).unwrap(), 0.0);
        let r = ["one two three four five six seven eight nine ten"];
        let h = ["one two three four five six seven eight nine TEN"];
        assert!((wer(&r, &h).unwrap() - 10.0).abs() < 1e-12);
        assert!((cer(&["abc"], &["abd"]).unwrap() - 100.0 / 3.0).abs() < 1e-12);
        assert!(matches!(wer(&["a"], &[] as &[&str]), Err(HtrError::InvalidInput(_))));
        assert!(matches!(wer(&[""], &["x"]), Err(HtrError::UndefinedMetric(_))));
    }

    #[test]
    fn tokenization_applies_to_both_sides() {
        assert_eq!(wer(&["end."], &["end ."]).unwrap(), 0.0);
        assert_eq!(cer(&["end."], &["end ."]).unwrap(), 0.0);
    }

    #[test]
    fn reports_render() {
        let rep = EvalReport::new(&["a b c"], &["a x c"]).unwrap();
        let text = rep.to_text().unwrap();
        assert!(text.starts_with("WER 33.33% (1 edits / 3 reference: 1 sub, 0 ins, 0 del)"));
        assert!(rep.to_key_values().unwrap().contains("cer=20.00\n"));
    }
}
