//! Decoder examples on hand-built matrices, checked by exhaustive scoring.

mod common;

use common::exhaustive_decode;
use htr_core::decoder::{decode_line, decode_segment, score, DecoderConfig, Dictionary, Source};
use htr_core::{Alphabet, ConfidenceMatrix};

fn alphabet() -> Alphabet {
    Alphabet::new(vec!['~', ' ', 'a', 'b', 'c', 'd'], 0).unwrap()
}

/// One frame per character of `frames` holding `p`, the rest spread evenly;
/// `-` is a garbage frame.
fn sharp(a: &Alphabet, frames: &str, p: f64) -> (Vec<f64>, usize) {
    let c = a.len();
    let mut data = Vec::new();
    for ch in frames.chars() {
        let k = if ch == '-' { 0 } else { a.class_of(ch).unwrap() };
        data.extend((0..c).map(|j| if j == k { p } else { (1.0 - p) / (c - 1) as f64 }));
    }
    (data, frames.chars().count())
}

#[test]
fn cost_is_negative_log_probability_plus_penalty() {
    let a = alphabet();
    // "abc" over three frames has exactly one path
    let (data, t) = sharp(&a, "abc", 0.8);
    let m = ConfidenceMatrix::new(t, a.len(), data).unwrap();
    let p: f64 = 0.8f64.powi(3);
    assert!((score("abc", &m, &a, 0.1).unwrap() - (-p.ln() + 0.3)).abs() < 1e-12);
}

/// "ab cd" and "abcd" carry the same four letters, so the length penalty
/// cancels between them and the one-word reading, with more alignments,
/// stays cheaper. The space frame still wins through the best path.
#[test]
fn space_frame_reads_as_two_words_through_the_best_path() {
    let a = alphabet();
    let (data, t) = sharp(&a, "ab cd", 0.9);
    let m = ConfidenceMatrix::new(t, a.len(), data.clone()).unwrap();
    let dict = Dictionary::from_words(&a, ["ab", "cd", "abcd"]);
    let words: Vec<(String, Vec<usize>)> =
        dict.words().iter().map(|w| (w.clone(), a.encode(w).unwrap().labels().to_vec())).collect();
    let gap = |alpha| {
        let one = exhaustive_decode(&data, t, a.len(), &words, 0, alpha, false).unwrap();
        let two = exhaustive_decode(&data, t, a.len(), &words, 0, alpha, true).unwrap();
        assert_eq!((one.0.as_str(), two.0.as_str()), ("abcd", "ab cd"));
        two.1 - one.1
    };
    let base = gap(0.0);
    assert!(base > 0.0);
    for alpha in [0.0, 0.15, 0.5, 2.0] {
        assert!((gap(alpha) - base).abs() < 1e-9, "alpha {alpha}");
        let got = decode_segment(&m, &dict, &DecoderConfig::with_alpha(alpha)).unwrap();
        assert_eq!((got.text.as_str(), got.source), ("ab cd", Source::BestPath), "alpha {alpha}");
    }
}

#[test]
fn line_decoding_splits_at_long_space_runs() {
    let a = alphabet();
    let (data, t) = sharp(&a, "-ab--  -cd-", 0.9);
    let m = ConfidenceMatrix::new(t, a.len(), data).unwrap();
    let dict = Dictionary::from_words(&a, ["ab", "cd", "abcd", "dc"]);
    assert_eq!(decode_line(&m, &dict, &DecoderConfig::default()).unwrap(), "ab cd");
}

#[test]
fn zero_penalty_picks_the_most_probable_word() {
    let a = alphabet();
    let (data, t) = sharp(&a, "-a-b", 0.7);
    let m = ConfidenceMatrix::new(t, a.len(), data).unwrap();
    let dict = Dictionary::from_words(&a, ["ab", "abb", "b", "a"]);
    let got = decode_segment(&m, &dict, &DecoderConfig::with_alpha(0.0)).unwrap();
    let best = dict
        .words()
        .iter()
        .map(|w| (score(w, &m, &a, 0.0).unwrap(), w.clone()))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .unwrap();
    assert_eq!(got.text, best.1);
    assert_eq!(got.text, "ab");
}
