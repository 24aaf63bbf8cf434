//! Property checks against the reference implementations in `common`.

mod common;

use common::{brute_force_probability, collapse_path, edit_oracle, exhaustive_decode, random_rows, rng};
use htr_core::ctc::{ctc_gradient, ctc_loss, LabelSequence};
use htr_core::decoder::{decode_one_word, decode_segment, decode_two_words, DecoderConfig, Dictionary};
use htr_core::evaluation::edit_distance;
use htr_core::pageio::build_alphabet;
use htr_core::training::{epoch_order, filter_short, sgd_step, DatasetSpec, Sample};
use htr_core::{ConfidenceMatrix, GrayImage};
use proptest::prelude::*;
use rand::Rng;

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// A `t x c` matrix and a target of at most `t` labels, all from `seed`.
fn instance(seed: u64, t: usize, c: usize) -> (Vec<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let rows = random_rows(&mut r, t, c, 3.0);
    let len = r.random_range(0..=t.min(3));
    let target = (0..len).map(|_| r.random_range(1..c)).collect();
    (rows, target)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ctc_loss_matches_path_enumeration(seed: u64, t in 1usize..=5, c in 2usize..=4) {
        let (rows, target) = instance(seed, t, c);
        let m = ConfidenceMatrix::new(t, c, rows.clone()).unwrap();
        let seq = LabelSequence::new(target.clone(), 0, c).unwrap();
        let p = brute_force_probability(&rows, t, c, &target, 0);
        match ctc_loss(&m, &seq) {
            Ok(loss) => prop_assert!(close((-loss).exp(), p, 1e-9), "{} vs {p}", (-loss).exp()),
            Err(_) => prop_assert!(p == 0.0 && seq.min_timesteps() > t),
        }
    }

    #[test]
    fn ctc_gradient_rows_sum_to_zero(seed: u64, t in 1usize..=12, c in 2usize..=6) {
        let (rows, target) = instance(seed, t, c);
        let m = ConfidenceMatrix::new(t, c, rows).unwrap();
        let seq = LabelSequence::new(target, 0, c).unwrap();
        prop_assume!(seq.min_timesteps() <= t);
        let g = ctc_gradient(&m, &seq).unwrap();
        for row in g.chunks(c) {
            prop_assert!(row.iter().sum::<f64>().abs() < 1e-12, "{row:?}");
        }
    }

    #[test]
    fn collapse_agrees_with_reference(path in proptest::collection::vec(0usize..4, 0..20)) {
        prop_assert_eq!(htr_core::ctc::collapse(path.iter().copied(), 0), collapse_path(&path, 0));
    }

    #[test]
    fn edit_counts_match_full_table(
        r in proptest::collection::vec(0u8..4, 0..12),
        h in proptest::collection::vec(0u8..4, 0..12),
    ) {
        let e = edit_distance(&r, &h);
        prop_assert_eq!((e.substitutions, e.insertions, e.deletions), edit_oracle(&r, &h));
    }

    #[test]
    fn edit_distance_is_symmetric_in_total(
        r in proptest::collection::vec(0u8..4, 0..12),
        h in proptest::collection::vec(0u8..4, 0..12),
    ) {
        prop_assert_eq!(edit_distance(&r, &h).total(), edit_distance(&h, &r).total());
    }

    #[test]
    fn sgd_step_is_linear_in_the_gradient(
        g1 in proptest::collection::vec(-4.0f64..4.0, 5),
        g2 in proptest::collection::vec(-4.0f64..4.0, 5),
        v0 in proptest::collection::vec(-1.0f64..1.0, 5),
        lr in 1e-4f64..1.0,
        momentum in 0.0f64..0.99,
    ) {
        let step = |g: &[f64]| {
            let mut p = vec![0.0; 5];
            let mut v = v0.clone();
            sgd_step(&mut p, g, &mut v, lr, momentum).unwrap();
            p
        };
        let sum: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
        let base = step(&[0.0; 5]);
        let (a, b, ab) = (step(&g1), step(&g2), step(&sum));
        for k in 0..5 {
            prop_assert!((ab[k] - base[k] - (a[k] - base[k]) - (b[k] - base[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn epoch_order_is_a_permutation(len in 0usize..60, seed: u64) {
        let mut order = epoch_order(len, seed);
        prop_assert_eq!(order.clone(), epoch_order(len, seed));
        order.sort_unstable();
        prop_assert_eq!(order, (0..len).collect::<Vec<_>>());
    }

    #[test]
    fn filter_short_is_monotone_in_the_limit(lengths in proptest::collection::vec(1usize..12, 0..10), k in 1usize..12) {
        let alphabet = build_alphabet(&["x"], '~').unwrap();
        let records = lengths
            .iter()
            .enumerate()
            .map(|(i, &n)| Sample::new(format!("{i}"), GrayImage::filled(2, 64, 255).unwrap(), "x".repeat(n), &alphabet).unwrap())
            .collect();
        let ds = DatasetSpec::new("d", records);
        let ids = |k| filter_short(&ds, k).unwrap().records.iter().map(|s| s.id.clone()).collect::<Vec<_>>();
        let (small, large) = (ids(k), ids(k + 1));
        prop_assert!(small.iter().all(|id| large.contains(id)));
        prop_assert_eq!(small.len(), lengths.iter().filter(|&&n| n <= k).count());
    }
}

const WORDS: [&str; 6] = ["a", "ab", "ba", "bab", "ca", "cc"];

fn lexicon(n: usize) -> (htr_core::Alphabet, Dictionary, Vec<(String, Vec<usize>)>) {
    let alphabet = build_alphabet(&["abc "], '~').unwrap();
    let words = &WORDS[..n];
    let dict = Dictionary::from_words(&alphabet, words);
    let labelled = words.iter().map(|w| (w.to_string(), alphabet.encode(w).unwrap().labels().to_vec())).collect();
    (alphabet, dict, labelled)
}

/// Cost of the greedy transcription, from the probability-space recursion.
fn best_path_cost(rows: &[f64], t: usize, c: usize, alpha: f64) -> f64 {
    let path: Vec<usize> = rows
        .chunks(c)
        .map(|r| (0..c).fold(0, |b, k| if r[k] > r[b] { k } else { b }))
        .collect();
    let labels = collapse_path(&path, 0);
    -common::forward_probability(rows, t, c, &labels, 0).ln() + alpha * labels.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn segment_decoding_is_the_cheapest_of_all_candidates(
        seed: u64,
        t in 1usize..=7,
        n in 1usize..=WORDS.len(),
        alpha in 0.0f64..2.0,
    ) {
        let (alphabet, dict, words) = lexicon(n);
        let c = alphabet.len();
        let rows = random_rows(&mut rng(seed), t, c, 2.5);
        let m = ConfidenceMatrix::new(t, c, rows.clone()).unwrap();
        let config = DecoderConfig::with_alpha(alpha);

        let one = exhaustive_decode(&rows, t, c, &words, 0, alpha, false);
        let two = exhaustive_decode(&rows, t, c, &words, 0, alpha, true);
        let got_one = decode_one_word(&m, &dict, &config).unwrap();
        let got_two = decode_two_words(&m, &dict, &config).unwrap();
        for (got, want) in [(&got_one, &one), (&got_two, &two)] {
            match want {
                Some((_, cost)) => prop_assert!(close(got.cost, *cost, 1e-9), "{} vs {cost}", got.cost),
                None => prop_assert!(!got.is_feasible()),
            }
        }

        let least = [one.map(|o| o.1), two.map(|o| o.1), Some(best_path_cost(&rows, t, c, alpha))]
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min);
        let seg = decode_segment(&m, &dict, &config).unwrap();
        prop_assert!(close(seg.cost, least, 1e-9), "{} vs {least}", seg.cost);
    }

    #[test]
    fn wide_beam_equals_exhaustive_search(seed: u64, t in 1usize..=8, alpha in 0.0f64..1.0) {
        let (alphabet, dict, _) = lexicon(WORDS.len());
        let c = alphabet.len();
        let m = ConfidenceMatrix::new(t, c, random_rows(&mut rng(seed), t, c, 2.5)).unwrap();
        let exhaustive = DecoderConfig::with_alpha(alpha);
        let beam = DecoderConfig { beam: Some(64), ..exhaustive.clone() };
        prop_assert_eq!(decode_segment(&m, &dict, &exhaustive).unwrap(), decode_segment(&m, &dict, &beam).unwrap());
        prop_assert_eq!(decode_two_words(&m, &dict, &exhaustive).unwrap(), decode_two_words(&m, &dict, &beam).unwrap());
    }
}
